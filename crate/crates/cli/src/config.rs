use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use weil_core::{Error, Tower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    StoneVonNeumann,
    Measures,
    Twists,
    Cocycle,
    Descent,
    MainTheorem,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::StoneVonNeumann,
        Suite::Measures,
        Suite::Twists,
        Suite::Cocycle,
        Suite::Descent,
        Suite::MainTheorem,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Suite::StoneVonNeumann => "stone-von-neumann",
            Suite::Measures => "measures",
            Suite::Twists => "twists",
            Suite::Cocycle => "cocycle",
            Suite::Descent => "descent",
            Suite::MainTheorem => "main-theorem",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.tag() == s)
            .ok_or_else(|| format!("unknown suite '{s}' (expected one of: {})", Suite::ALL.map(|x| x.tag()).join(", ")))
    }
}

/// Every record name a suite can produce.
pub const CHECK_NAMES: [&str; 24] = [
    "heisenberg-law",
    "central-character",
    "mode-agreement",
    "intertwining",
    "haar-normalization",
    "haar-additivity",
    "haar-twist",
    "fourier-inversion",
    "character-measure",
    "similitude-measure",
    "measure-rationality",
    "similitude-twist",
    "galois-twist",
    "galois-equivariance",
    "galois-conjugation",
    "dilation-fixed",
    "dilation-defect",
    "parity-defect",
    "cocycle-law",
    "cocycle-conjugation",
    "averaging-certificate",
    "splitting",
    "rational-conjugate",
    "stability-in-N",
];

/// Everything that determines a run. Reports echo it verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunConfig {
    pub p: u64,
    pub n: usize,
    /// Depth `N` of the cyclotomic tower `Q(ζ_{4p^N})`.
    #[serde(rename = "N")]
    pub depth: u32,
    /// Working cells `(j, k)`.
    pub cells: Vec<(i64, i64)>,
    /// Seeded random combinations added to the atoms of each cell.
    pub random_probes: usize,
    pub seed: u64,
    pub suites: Vec<Suite>,
    /// Random Heisenberg pairs and random `(g, atom)` pairs.
    pub pairs: usize,
    /// Random words for the intertwining and main-theorem checks.
    pub words: usize,
    /// Re-run the main-theorem checks one level deeper and compare outcomes.
    pub stability: bool,
    /// Restrict to these check names; empty means every check of the suites.
    pub checks: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: 3,
            n: 1,
            depth: 2,
            cells: vec![(0, 1)],
            random_probes: 3,
            seed: 0,
            suites: Suite::ALL.to_vec(),
            pairs: 100,
            words: 20,
            stability: false,
            checks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    /// Rejects bad input before any computation.
    pub fn validate(&self) -> Result<Tower, ConfigError> {
        if self.n == 0 {
            return Err(ConfigError("n must be at least 1".into()));
        }
        for &(j, k) in &self.cells {
            if j > k {
                return Err(ConfigError(Error::InvalidCell { j, k }.to_string()));
            }
        }
        if self.cells.is_empty() {
            return Err(ConfigError("at least one working cell is needed".into()));
        }
        if self.suites.is_empty() {
            return Err(ConfigError("no suite selected".into()));
        }
        if let Some(bad) = self.checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
            return Err(ConfigError(format!("unknown check '{bad}' (expected one of: {})", CHECK_NAMES.join(", "))));
        }
        Tower::new(self.p, self.depth).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn wants(&self, check: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == check)
    }

    pub fn tower(&self) -> Tower {
        Tower::new(self.p, self.depth).expect("validated configuration")
    }
}

/// `"j,k"`.
pub fn parse_cell(s: &str) -> Result<(i64, i64), String> {
    let (j, k) = s.split_once(',').ok_or_else(|| format!("cell '{s}' is not of the form j,k"))?;
    let j = j.trim().parse().map_err(|_| format!("bad cell start '{j}'"))?;
    let k = k.trim().parse().map_err(|_| format!("bad cell end '{k}'"))?;
    Ok((j, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        assert_eq!((c.p, c.n, c.depth, c.cells.clone()), (3, 1, 2, vec![(0, 1)]));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_primes_and_cells() {
        for p in [2, 9, 1] {
            let c = RunConfig { p, ..RunConfig::default() };
            assert!(c.validate().is_err(), "p = {p}");
        }
        let c = RunConfig { cells: vec![(2, 1)], ..RunConfig::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { n: 0, ..RunConfig::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { checks: vec!["lemma".into()], ..RunConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn suites_and_cells_parse() {
        assert_eq!("main-theorem".parse::<Suite>(), Ok(Suite::MainTheorem));
        assert!("lemma".parse::<Suite>().is_err());
        assert_eq!(parse_cell("-1,1"), Ok((-1, 1)));
        assert!(parse_cell("3").is_err());
    }
}
