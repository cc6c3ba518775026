//! Native network documents: pretty-printed JSON mirroring [`Network`].

use super::Network;
use crate::error::Result;

pub fn parse_native(text: &str) -> Result<Network> {
    Ok(serde_json::from_str(text)?)
}

pub fn to_native(net: &Network) -> Result<String> {
    Ok(serde_json::to_string_pretty(net)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn round_trip_case57() {
        let net = cases::case57();
        let text = to_native(&net).unwrap();
        assert_eq!(parse_native(&text).unwrap(), net);
    }
}
