//! Predictive control of discrete-time queueing networks whose link success
//! probabilities are switched by a Markov chain.
//!
//! The crate contains the network model ([`model`]), the chain machinery
//! ([`markov`]), a seeded simulator ([`dynamics`]), the prediction problem of
//! the receding-horizon controller ([`predictor`]), in-repo LP and binary
//! program solvers ([`optim`]), the control policies ([`policies`]), stability
//! region analysis ([`stability`]) and the experiment harness ([`harness`]).

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod markov;
pub mod model;
pub mod optim;
pub mod policies;
pub mod predictor;
pub mod stability;

pub use error::{ChainError, ModelError, OracleError, PolicyError, ScenarioError, SimError, SolverError};
pub use markov::MarkovChain;
pub use model::{enumerate_control_set, negative_part, validate_network, ArrivalProcess, ControlVector, Network, RawNetwork};

/// Exact rational used for arrival rates and constraint right-hand sides.
pub type Rational = num::rational::Ratio<i64>;

/// Parses `"p/q"`, `"n"` or a finite decimal such as `"0.45"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let t = text.trim();
    let bad = || format!("'{text}' is not a rational number");
    if let Some((n, d)) = t.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(format!("'{text}' has a zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = t.split_once('.') {
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let scale = 10i64.pow(frac.len() as u32);
        let f: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let mag = int.abs() * scale + f;
        return Ok(Rational::new(if neg { -mag } else { mag }, scale));
    }
    t.parse::<i64>().map(Rational::from_integer).map_err(|_| bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("9/20").unwrap(), Rational::new(9, 20));
        assert_eq!(parse_rational("0.45").unwrap(), Rational::new(9, 20));
        assert_eq!(parse_rational("-1.5").unwrap(), Rational::new(-3, 2));
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }
}
