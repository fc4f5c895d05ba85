//! Chain descriptions bundled into the library so binaries run without any
//! external data files. Referenced elsewhere as `builtin:<name>`.

use crate::chain::{Chain, ChainError};

const ARM_WAIST_10DOF: &str = include_str!("../assets/arm_waist_10dof.chain");
const LEG_6DOF: &str = include_str!("../assets/leg_6dof.chain");

pub const BUILTIN_CHAINS: &[&str] = &["arm_waist_10dof", "leg_6dof"];

/// Raw chain file text for a builtin name, if it exists.
pub fn builtin_chain_text(name: &str) -> Option<&'static str> {
    match name {
        "arm_waist_10dof" => Some(ARM_WAIST_10DOF),
        "leg_6dof" => Some(LEG_6DOF),
        _ => None,
    }
}

pub fn builtin_chain(name: &str) -> Result<Chain, ChainError> {
    let text = builtin_chain_text(name).ok_or_else(|| {
        ChainError::Invalid(format!(
            "no builtin chain '{name}' (available: {})",
            BUILTIN_CHAINS.join(", ")
        ))
    })?;
    Chain::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_builtin_parses() {
        for name in BUILTIN_CHAINS {
            builtin_chain(name).unwrap();
        }
    }

    #[test]
    fn unknown_builtin_is_an_error() {
        assert!(builtin_chain("nope").is_err());
    }
}
