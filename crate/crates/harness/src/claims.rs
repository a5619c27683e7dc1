//! Registered claim identifiers and what each one checks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A verifiable asymptotic statement about the flow.
///
/// The string forms (`thm2.2`, `thm2.6.odd.n1`, ...) are the stable names
/// used in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClaimId {
    /// Lyapunov rate of the two-point distance.
    Lyapunov,
    /// Rate of `ln(1 - Φ(ξ))`.
    LogDeficitRate,
    /// The distance is a martingale.
    Martingale,
    /// Odd distance moment `h_{2n+1}`.
    OddMoment(u32),
    /// Even distance moment `h_{2n+2}` bracket.
    EvenBracket(u32),
    /// Growth exponent of `h_m`.
    Growth(u32),
    /// Itô identity between `h_{m+2}` and `h_m`.
    Recursion(u32),
    MixedEven(u32),
    MixedCenteredEven(u32),
    MixedOdd(u32),
    MixedCenteredOdd(u32),
    ConditionalIdentity,
    PositionPhi,
    CrossMoment,
    /// Rescaled paths of two particles merge.
    Shrinkage,
    Arratia,
}

/// Which simulations a claim reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Distance,
    RecursionEnsemble(u32),
    Flow,
    Scaled,
    Arratia,
}

/// How an estimate is compared with its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Relative(f64),
    StdErrors(f64),
    /// Bracket widened by this many standard errors.
    Bracket(f64),
    Absolute(f64),
    /// Monotone decrease over horizons.
    Decreasing,
    /// Monotone over ε within CI overlap, final value within a relative band.
    ArratiaTrend(f64),
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Tolerance::Relative(r) => write!(f, "{}% relative", r * 100.0),
            Tolerance::StdErrors(k) => write!(f, "{k} std errors"),
            Tolerance::Bracket(k) => write!(f, "bracket widened by {k} std errors"),
            Tolerance::Absolute(a) => write!(f, "absolute {a}"),
            Tolerance::Decreasing => f.write_str("decreasing in T"),
            Tolerance::ArratiaTrend(r) => {
                write!(f, "monotone in eps within CI overlap, final {}% relative", r * 100.0)
            }
        }
    }
}

impl ClaimId {
    /// Every claim family, with a representative index where one applies.
    pub const FAMILIES: [&'static str; 16] = [
        "thm2.2",
        "cor2.3",
        "h1.martingale",
        "thm2.6.odd.n{n}",
        "thm2.6.even.n{n}",
        "growth.h{m}",
        "recursion.m{m}",
        "thm3.3.even.n{n}",
        "thm3.3.centered.even.n{n}",
        "thm3.3.odd.n{n}",
        "thm3.3.centered.odd.n{n}",
        "thm3.4",
        "cor3.9",
        "prop3.10",
        "lemma3.1",
        "arratia",
    ];

    /// The limit statement the claim verifies.
    pub fn anchor(&self) -> String {
        match *self {
            ClaimId::Lyapunov => "lim (1/t) ln(x(u,t) - x(v,t)) = -L'/2".into(),
            ClaimId::LogDeficitRate => "lim (1/t) ln(1 - Phi(x(u,t) - x(v,t))) = -L'".into(),
            ClaimId::Martingale => "E(x(u,t) - x(v,t)) = u - v".into(),
            ClaimId::OddMoment(n) => format!(
                "lim t^-{n} E(x(u,t) - x(v,t))^{} = 2^{n} {}!! (u - v)",
                2 * n + 1,
                2 * n + 1
            ),
            ClaimId::EvenBracket(n) => format!(
                "t^-{}/2 E(x(u,t) - x(v,t))^{} in [c_*, c^*] 2^{n} {}!! |u - v|",
                2 * n + 1,
                2 * n + 2,
                2 * n + 2
            ),
            ClaimId::Growth(m) => format!("h_{m}(t) grows like t^{}", growth_target(m)),
            ClaimId::Recursion(m) => format!(
                "h_{}(t) = (u-v)^{} + {} int_0^t (h_{m} - E[xi^{m} Phi(xi)]) ds",
                m + 2,
                m + 2,
                (m + 2) * (m + 1)
            ),
            ClaimId::MixedEven(n) => format!("lim t^-{n} E[{}] = {}!!", product("x", 2 * n), 2 * n - 1),
            ClaimId::MixedCenteredEven(n) => {
                format!("lim t^-{n} E[{}] = {}!!", product("xbar", 2 * n), 2 * n - 1)
            }
            ClaimId::MixedOdd(n) => format!("lim t^-({n}-1/2) E[{}] = 0", product("x", 2 * n - 1)),
            ClaimId::MixedCenteredOdd(n) => format!("lim t^-({n}-1/2) E[{}] = 0", product("xbar", 2 * n - 1)),
            ClaimId::ConditionalIdentity => {
                "E[xbar(u,t) g(xi_t)] = 1/2 E[(xbar(u,t) - xbar(v,t)) g(xi_t)]".into()
            }
            ClaimId::PositionPhi => "lim E[x(u,t) Phi(x(u,t) - x(v,t))] = (u + v)/2".into(),
            ClaimId::CrossMoment => "lim (1/t) E[x(u,t)^2 x(v,t)] = u + 2v".into(),
            ClaimId::Shrinkage => "E max_s |xbar_T(u,s) - xbar_T(v,s)|^2 -> 0 as T -> inf".into(),
            ClaimId::Arratia => {
                "P(|xi_t| < delta) -> erfc(|u - v|/(2 sqrt t)) as eps -> 0".into()
            }
        }
    }

    pub fn tolerance(&self) -> Tolerance {
        match *self {
            ClaimId::Lyapunov => Tolerance::Relative(0.10),
            ClaimId::LogDeficitRate => Tolerance::Relative(0.15),
            ClaimId::Martingale | ClaimId::ConditionalIdentity | ClaimId::PositionPhi => {
                Tolerance::StdErrors(3.0)
            }
            ClaimId::Recursion(_) => Tolerance::StdErrors(3.0),
            ClaimId::OddMoment(n) | ClaimId::MixedEven(n) | ClaimId::MixedCenteredEven(n) => {
                Tolerance::Relative(if n <= 1 { 0.10 } else { 0.15 })
            }
            ClaimId::EvenBracket(_) => Tolerance::Bracket(3.0),
            ClaimId::Growth(m) => Tolerance::Absolute(if m <= 3 { 0.10 } else { 0.15 }),
            ClaimId::MixedOdd(_) | ClaimId::MixedCenteredOdd(_) => Tolerance::Decreasing,
            ClaimId::CrossMoment => Tolerance::Relative(0.10),
            ClaimId::Shrinkage => Tolerance::Decreasing,
            ClaimId::Arratia => Tolerance::ArratiaTrend(0.10),
        }
    }

    /// Short description of the Monte Carlo estimator.
    pub fn estimator(&self) -> &'static str {
        match self {
            ClaimId::Lyapunov => "mean of ln(xi_t)/t over distance paths",
            ClaimId::LogDeficitRate => "mean of ln(1 - Phi(xi_t))/t over distance paths",
            ClaimId::Martingale => "mean of xi_t",
            ClaimId::OddMoment(_) | ClaimId::EvenBracket(_) => "mean of xi_t^m, normalized",
            ClaimId::Growth(_) => "log-log least squares slope of h_m past burn-in",
            ClaimId::Recursion(_) => "Monte Carlo h_{m+2} against the Ito reconstruction, combined standard errors",
            ClaimId::MixedEven(_)
            | ClaimId::MixedCenteredEven(_)
            | ClaimId::MixedOdd(_)
            | ClaimId::MixedCenteredOdd(_) => "mean of the particle product, normalized",
            ClaimId::ConditionalIdentity => "residual for g in {1, Phi, 1(xi > u - v)}",
            ClaimId::PositionPhi => "mean of x(u,t) Phi(xi_t)",
            ClaimId::CrossMoment => "mean of x(u,t)^2 x(v,t)/t",
            ClaimId::Shrinkage => "mean squared max of the rescaled separation",
            ClaimId::Arratia => "close-pair frequency against the coalescing reference",
        }
    }

    /// Number of listed particles the claim reads.
    pub fn particles_needed(&self) -> usize {
        match *self {
            ClaimId::MixedEven(n) | ClaimId::MixedCenteredEven(n) => 2 * n as usize,
            ClaimId::MixedOdd(n) | ClaimId::MixedCenteredOdd(n) => 2 * n as usize - 1,
            _ => 2,
        }
    }

    pub fn source(&self) -> Source {
        match *self {
            ClaimId::Lyapunov
            | ClaimId::LogDeficitRate
            | ClaimId::Martingale
            | ClaimId::OddMoment(_)
            | ClaimId::EvenBracket(_)
            | ClaimId::Growth(_) => Source::Distance,
            ClaimId::Recursion(m) => Source::RecursionEnsemble(m),
            ClaimId::MixedEven(_)
            | ClaimId::MixedCenteredEven(_)
            | ClaimId::MixedOdd(_)
            | ClaimId::MixedCenteredOdd(_)
            | ClaimId::ConditionalIdentity
            | ClaimId::PositionPhi
            | ClaimId::CrossMoment => Source::Flow,
            ClaimId::Shrinkage => Source::Scaled,
            ClaimId::Arratia => Source::Arratia,
        }
    }
}

/// Exponent of `t` in the growth of `h_m`.
pub fn growth_target(m: u32) -> f64 {
    (m as f64 - 1.0) / 2.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownClaim(pub String);

impl fmt::Display for UnknownClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown claim `{}`; registered families: {}", self.0, ClaimId::FAMILIES.join(", "))
    }
}

impl std::error::Error for UnknownClaim {}

fn index(s: &str, prefix: &str, min: u32) -> Option<u32> {
    let n: u32 = s.strip_prefix(prefix)?.parse().ok()?;
    (n >= min && n <= 16).then_some(n)
}

impl FromStr for ClaimId {
    type Err = UnknownClaim;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fixed = match s {
            "thm2.2" => Some(ClaimId::Lyapunov),
            "cor2.3" => Some(ClaimId::LogDeficitRate),
            "h1.martingale" => Some(ClaimId::Martingale),
            "thm3.4" => Some(ClaimId::ConditionalIdentity),
            "cor3.9" => Some(ClaimId::PositionPhi),
            "prop3.10" => Some(ClaimId::CrossMoment),
            "lemma3.1" => Some(ClaimId::Shrinkage),
            "arratia" => Some(ClaimId::Arratia),
            _ => None,
        };
        fixed
            .or_else(|| index(s, "thm2.6.odd.n", 1).map(ClaimId::OddMoment))
            .or_else(|| index(s, "thm2.6.even.n", 0).map(ClaimId::EvenBracket))
            .or_else(|| index(s, "growth.h", 2).map(ClaimId::Growth))
            .or_else(|| {
                index(s, "recursion.m", 1)
                    .filter(|m| m % 2 == 1)
                    .map(ClaimId::Recursion)
            })
            .or_else(|| index(s, "thm3.3.even.n", 1).map(ClaimId::MixedEven))
            .or_else(|| index(s, "thm3.3.centered.even.n", 1).map(ClaimId::MixedCenteredEven))
            .or_else(|| index(s, "thm3.3.odd.n", 1).map(ClaimId::MixedOdd))
            .or_else(|| index(s, "thm3.3.centered.odd.n", 1).map(ClaimId::MixedCenteredOdd))
            .ok_or_else(|| UnknownClaim(s.to_string()))
    }
}

impl fmt::Display for ClaimId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClaimId::Lyapunov => f.write_str("thm2.2"),
            ClaimId::LogDeficitRate => f.write_str("cor2.3"),
            ClaimId::Martingale => f.write_str("h1.martingale"),
            ClaimId::OddMoment(n) => write!(f, "thm2.6.odd.n{n}"),
            ClaimId::EvenBracket(n) => write!(f, "thm2.6.even.n{n}"),
            ClaimId::Growth(m) => write!(f, "growth.h{m}"),
            ClaimId::Recursion(m) => write!(f, "recursion.m{m}"),
            ClaimId::MixedEven(n) => write!(f, "thm3.3.even.n{n}"),
            ClaimId::MixedCenteredEven(n) => write!(f, "thm3.3.centered.even.n{n}"),
            ClaimId::MixedOdd(n) => write!(f, "thm3.3.odd.n{n}"),
            ClaimId::MixedCenteredOdd(n) => write!(f, "thm3.3.centered.odd.n{n}"),
            ClaimId::ConditionalIdentity => f.write_str("thm3.4"),
            ClaimId::PositionPhi => f.write_str("cor3.9"),
            ClaimId::CrossMoment => f.write_str("prop3.10"),
            ClaimId::Shrinkage => f.write_str("lemma3.1"),
            ClaimId::Arratia => f.write_str("arratia"),
        }
    }
}

impl TryFrom<String> for ClaimId {
    type Error = UnknownClaim;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ClaimId> for String {
    fn from(c: ClaimId) -> String {
        c.to_string()
    }
}

fn product(x: &str, k: u32) -> String {
    match k {
        1 => format!("{x}(u_1,t)"),
        2 => format!("{x}(u_1,t) {x}(u_2,t)"),
        _ => format!("{x}(u_1,t) ... {x}(u_{k},t)"),
    }
}
