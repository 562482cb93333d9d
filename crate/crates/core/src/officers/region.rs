use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

const SHIPPED: &str = include_str!("../../data/postcode_regions.csv");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Named(String),
    /// Non-UK, malformed, or unknown postcode.
    Excluded,
}

impl Region {
    pub fn name(&self) -> Option<&str> {
        match self {
            Region::Named(s) => Some(s),
            Region::Excluded => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name().unwrap_or("Excluded"))
    }
}

/// Postcode prefix to region table with longest-prefix lookup.
#[derive(Debug, Clone)]
pub struct PostcodeRegions {
    prefixes: BTreeMap<String, String>,
    longest: usize,
}

impl Default for PostcodeRegions {
    /// The bundled UK postcode-area table.
    fn default() -> Self {
        Self::parse(SHIPPED).expect("bundled table parses")
    }
}

impl PostcodeRegions {
    /// `PREFIX,REGION` lines; `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut prefixes = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (p, r) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected PREFIX,REGION", i + 1))?;
            let p: String = p.split_whitespace().collect::<String>().to_uppercase();
            if p.is_empty() || r.trim().is_empty() {
                return Err(format!("line {}: empty field", i + 1));
            }
            prefixes.insert(p, r.trim().to_string());
        }
        let longest = prefixes.keys().map(String::len).max().unwrap_or(0);
        Ok(Self { prefixes, longest })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }

    /// Region for a postcode. The postcode must start like a UK one (one or
    /// two letters then a digit); the longest table prefix of its compact
    /// form wins.
    pub fn map_region(&self, postcode: &str) -> Region {
        let compact: String = postcode
            .chars()
            .filter(|c| !c.is_whitespace())
            .flat_map(char::to_uppercase)
            .collect();
        let letters = compact.chars().take_while(|c| c.is_ascii_alphabetic()).count();
        let next_is_digit = compact.chars().nth(letters).is_some_and(|c| c.is_ascii_digit());
        if !(1..=2).contains(&letters) || !next_is_digit {
            return Region::Excluded;
        }
        for len in (1..=self.longest.min(compact.len())).rev() {
            if let Some(r) = self.prefixes.get(&compact[..len]) {
                return Region::Named(r.clone());
            }
        }
        Region::Excluded
    }
}

/// Shorthand for the bundled table.
pub fn map_region(postcode: &str, table: &PostcodeRegions) -> Region {
    table.map_region(postcode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let t = PostcodeRegions::default();
        assert_eq!(t.len(), 121);
        assert_eq!(t.map_region("EC1A 1BB"), Region::Named("Greater London".into()));
        assert_eq!(t.map_region("eh1 1yz"), Region::Named("Scotland".into()));
        assert_eq!(t.map_region("E1 6AN"), Region::Named("Greater London".into()));
        assert_eq!(t.map_region("G2 1DU"), Region::Named("Scotland".into()));
        assert_eq!(t.map_region("GU1 1AA"), Region::Named("South East".into()));
        assert_eq!(t.map_region("BT1 1AA"), Region::Named("Northern Ireland".into()));
        assert_eq!(t.map_region("ZZ99 9ZZ"), Region::Excluded);
        assert_eq!(t.map_region(""), Region::Excluded);
        assert_eq!(t.map_region("75008"), Region::Excluded);
        assert_eq!(t.map_region("JE2 3AB"), Region::Excluded);
    }

    #[test]
    fn longer_prefix_overrides() {
        let t = PostcodeRegions::parse("E,East\nEC1,City\n").unwrap();
        assert_eq!(t.map_region("EC1A 1BB"), Region::Named("City".into()));
        assert_eq!(t.map_region("EC2A 1BB"), Region::Named("East".into()));
    }
}
