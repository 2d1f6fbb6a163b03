use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Whether a program (tracing or quarantine) exists and who decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramMode {
    Optional,
    Mandatory,
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityMode {
    Free,
    FixedAtMax,
}

/// The six program regimes.
///
/// The first letter is the tracing regime, the second the quarantine regime
/// (`O`ptional / `M`andatory). `NI` has neither program, `NA` is `OO` with
/// activity pinned at the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Treatment {
    OO,
    OM,
    MO,
    MM,
    NI,
    NA,
}

impl Treatment {
    pub const ALL: [Treatment; 6] = [
        Treatment::NA,
        Treatment::NI,
        Treatment::OO,
        Treatment::OM,
        Treatment::MO,
        Treatment::MM,
    ];

    pub fn tracing_mode(self) -> ProgramMode {
        match self {
            Treatment::OO | Treatment::OM | Treatment::NA => ProgramMode::Optional,
            Treatment::MO | Treatment::MM => ProgramMode::Mandatory,
            Treatment::NI => ProgramMode::Unavailable,
        }
    }

    pub fn quarantine_mode(self) -> ProgramMode {
        match self {
            Treatment::OO | Treatment::MO | Treatment::NA => ProgramMode::Optional,
            Treatment::OM | Treatment::MM => ProgramMode::Mandatory,
            Treatment::NI => ProgramMode::Unavailable,
        }
    }

    pub fn activity_mode(self) -> ActivityMode {
        match self {
            Treatment::NA => ActivityMode::FixedAtMax,
            _ => ActivityMode::Free,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::OO => "OO",
            Treatment::OM => "OM",
            Treatment::MO => "MO",
            Treatment::MM => "MM",
            Treatment::NI => "NI",
            Treatment::NA => "NA",
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown treatment `{0}` (expected one of OO, OM, MO, MM, NI, NA)")]
pub struct UnknownTreatment(pub String);

impl FromStr for Treatment {
    type Err = UnknownTreatment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OO" => Ok(Treatment::OO),
            "OM" => Ok(Treatment::OM),
            "MO" => Ok(Treatment::MO),
            "MM" => Ok(Treatment::MM),
            "NI" => Ok(Treatment::NI),
            "NA" => Ok(Treatment::NA),
            _ => Err(UnknownTreatment(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProgramMode::*;

    #[test]
    fn program_modes_follow_names() {
        assert_eq!(Treatment::NI.tracing_mode(), Unavailable);
        assert_eq!(Treatment::NI.quarantine_mode(), Unavailable);
        assert_eq!(Treatment::NA.activity_mode(), ActivityMode::FixedAtMax);
        assert_eq!(Treatment::NA.tracing_mode(), Optional);
        assert_eq!(Treatment::NA.quarantine_mode(), Optional);
        for t in [Treatment::MO, Treatment::MM] {
            assert_eq!(t.tracing_mode(), Mandatory);
        }
        for t in [Treatment::OM, Treatment::MM] {
            assert_eq!(t.quarantine_mode(), Mandatory);
        }
        assert_eq!(Treatment::OO.tracing_mode(), Optional);
        assert_eq!(Treatment::OO.quarantine_mode(), Optional);
        for t in Treatment::ALL {
            if t != Treatment::NA {
                assert_eq!(t.activity_mode(), ActivityMode::Free);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for t in Treatment::ALL {
            assert_eq!(t.as_str().parse::<Treatment>().unwrap(), t);
        }
        assert_eq!("mm".parse::<Treatment>().unwrap(), Treatment::MM);
        assert!("XX".parse::<Treatment>().is_err());
    }
}
