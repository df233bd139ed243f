//! Plain JSON road network:
//!
//! ```json
//! { "origin": {"lat": 37.77, "lon": -122.41},      // optional
//!   "nodes": [{"id": 1, "x": 0.0, "y": 0.0}, ...],  // local meters
//!   "ways":  [{"id": 10, "nodes": [1, 2], "oneway": true, "highway": "primary"}] }
//! ```

use super::RawRoadNetwork;
use crate::error::Result;

pub fn parse_network_json(text: &str) -> Result<RawRoadNetwork> {
    let net: RawRoadNetwork = serde_json::from_str(text)?;
    net.validate()?;
    Ok(net)
}

pub fn write_network_json(net: &RawRoadNetwork) -> String {
    serde_json::to_string_pretty(net).expect("network serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn minimal_document() {
        let text = r#"{"nodes":[{"id":1,"x":0,"y":0},{"id":2,"x":10,"y":0}],
                       "ways":[{"id":5,"nodes":[1,2],"oneway":true}]}"#;
        let net = parse_network_json(text).unwrap();
        assert_eq!(net.nodes.len(), 2);
        assert_eq!(net.ways[0].highway, "residential");
        assert_eq!(parse_network_json(&write_network_json(&net)).unwrap(), net);
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let text = r#"{"nodes":[{"id":1,"x":0,"y":0}],"ways":[{"id":9,"nodes":[1,2]}]}"#;
        assert!(matches!(parse_network_json(text), Err(Error::Validation(m)) if m.contains('9')));
    }
}
