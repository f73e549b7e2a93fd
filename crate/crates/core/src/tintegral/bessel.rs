//! The integrals `B_∞(l, α) = ∫_{|x| = q^l} ψ(α/x + x) dx` and their
//! `ε_x`-twisted versions `B̃_∞`, which specialize to `Kl_∞` and `Sa_∞` when
//! `|α| = q^{2l}`.
//!
//! Write `α = t^{2l+k} α′ (1 + α̃)` and `x = t^l x′ (1 + x̃)`. The shell is the
//! union over `x′ ∈ F_q^×` of balls of measure `q^l`, and on each ball the
//! integral reduces to an `F_q`-value `T(x′)`:
//!
//! * `k > 0`: `T = 1` if `l + k < −1`, `e_q(α′/x′)` if `l + k = −1`, else 0.
//! * `k < 0`: `T = 1` if `l < −1`, `e_q(x′)` if `l = −1`, else 0.
//! * `k = 0`: `T = 1` if `l < −1`, `e_q(α′/x′ + x′)` if `l = −1`; for
//!   `l ≥ 0` only the stationary points `x′² = α′` survive, with
//!   `T = ψ(2t^l x′ s) 𝒢(x′ t^l)` where `s = (1 + α̃)^{1/2}`.
//!
//! The twist `ε_x` is `G(a_x)/|G(a_x)|` for odd `ord x` and 1 for even
//! `ord x`, matching the normalization of `𝒢`.

use serde::{Deserialize, Serialize};

use super::{integrate_phase, BoxRegion};
use crate::basefield::{Fq, ScaledCyclotomic};
use crate::error::{Error, Result};
use crate::laurent::{gauss_factor_from, TruncLaurent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BesselKind {
    /// `B_∞` (`Kl_∞` for `k = 0`).
    Plain,
    /// `B̃_∞` (`Sa_∞` for `k = 0`).
    Twisted,
}

/// Which row of the case table applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BesselCase {
    /// Both phases are below `t^{-1}`: the integrand is 1.
    Flat,
    /// One phase reaches exactly `t^{-1}` (`k ≠ 0`).
    Boundary,
    /// The dominant phase is at least `t^0` and `k ≠ 0`: the integral vanishes.
    Vanishing,
    /// `k = 0`, `l = −1`: a finite-field Kloosterman or Salié sum.
    Kloosterman,
    /// `k = 0`, `l ≥ 0`, `α′` a square: stationary points.
    Stationary,
    /// `k = 0`, `l ≥ 0`, `α′` not a square.
    NonResidue,
}

fn decompose(l: i64, alpha: &TruncLaurent) -> Result<(i64, u32)> {
    if alpha.is_zero() {
        return Err(Error::InvalidInput("B_inf needs a nonzero alpha".into()));
    }
    let d = alpha.deg()?;
    Ok((d - 2 * l, alpha.lc()))
}

pub fn bessel_case(l: i64, alpha: &TruncLaurent) -> Result<BesselCase> {
    let (k, ap) = decompose(l, alpha)?;
    let fq = alpha.field();
    Ok(if k != 0 {
        let m = (l + k).max(l);
        match m.cmp(&-1) {
            std::cmp::Ordering::Less => BesselCase::Flat,
            std::cmp::Ordering::Equal => BesselCase::Boundary,
            std::cmp::Ordering::Greater => BesselCase::Vanishing,
        }
    } else if l < -1 {
        BesselCase::Flat
    } else if l == -1 {
        BesselCase::Kloosterman
    } else if fq.chi(ap) == 1 {
        BesselCase::Stationary
    } else {
        BesselCase::NonResidue
    })
}

/// `ε_x` on the shell `|x| = q^l` through the leading coefficient.
pub fn shell_weight(p: u32, l: i64, lead: u32, kind: BesselKind) -> Result<ScaledCyclotomic> {
    if kind == BesselKind::Plain || l.rem_euclid(2) == 0 {
        return Ok(ScaledCyclotomic::one(p));
    }
    Ok(Fq::unchecked(p).gauss_sum_fq(lead)?.scale(1))
}

/// Closed form of `B_∞(l, α)` or `B̃_∞(l, α)` from the case table.
pub fn b_inf_closed(l: i64, alpha: &TruncLaurent, kind: BesselKind) -> Result<ScaledCyclotomic> {
    let (k, ap) = decompose(l, alpha)?;
    let p = alpha.p();
    let fq = alpha.field();
    let mut total = ScaledCyclotomic::zero(p);
    for x in fq.units() {
        let xi = fq.inv(x).expect("unit");
        let local = if k > 0 {
            match (l + k).cmp(&-1) {
                std::cmp::Ordering::Less => Some(ScaledCyclotomic::one(p)),
                std::cmp::Ordering::Equal => Some(fq.eq_char(fq.mul(ap, xi))),
                std::cmp::Ordering::Greater => None,
            }
        } else if k < 0 {
            match l.cmp(&-1) {
                std::cmp::Ordering::Less => Some(ScaledCyclotomic::one(p)),
                std::cmp::Ordering::Equal => Some(fq.eq_char(x)),
                std::cmp::Ordering::Greater => None,
            }
        } else if l < -1 {
            Some(ScaledCyclotomic::one(p))
        } else if l == -1 {
            Some(fq.eq_char(fq.add(fq.mul(ap, xi), x)))
        } else if fq.mul(x, x) == ap {
            // s = (α / (α′ t^{2l}))^{1/2} = (1 + α̃)^{1/2}
            let unit = alpha.shift(-2 * l).scale(fq.inv(ap).expect("unit"));
            let s = unit.sqrt(-l - 2)?;
            let phase = s.shift(l).scale(fq.mul(2, x)).psi_exponent()?;
            Some(&fq.eq_char(phase) * &gauss_factor_from(p, l, x)?)
        } else {
            None
        };
        if let Some(v) = local {
            let term = &v * &shell_weight(p, l, x, kind)?;
            total = total
                .checked_add(&term)
                .ok_or_else(|| Error::InvalidInput("shell contributions in different √q classes".into()))?;
        }
    }
    Ok(total.scale(-2 * l as i32))
}

/// `B_∞` by direct integration over the `q − 1` balls of the shell. The
/// integrand is constant on cells of size `q^σ` with
/// `σ = min(−1, −1 − k, l)`.
pub fn b_inf_direct(l: i64, alpha: &TruncLaurent, kind: BesselKind) -> Result<ScaledCyclotomic> {
    let (k, _) = decompose(l, alpha)?;
    let p = alpha.p();
    let sigma = (-1).min(-1 - k).min(l);
    let mut total = ScaledCyclotomic::zero(p);
    for x0 in alpha.field().units() {
        let region = BoxRegion::ball(vec![TruncLaurent::monomial(p, x0, l)], l)?;
        let part = integrate_phase(&region, sigma, |x| {
            let v = alpha.div(&x[0], -1)?.add(&x[0]);
            Ok(Some(v.psi_exponent()?))
        })?;
        let term = &part * &shell_weight(p, l, x0, kind)?;
        total = total
            .checked_add(&term)
            .ok_or_else(|| Error::InvalidInput("shell contributions in different √q classes".into()))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        // l = −3, k = 1: max(l + k, l) = −2, so (q − 1) q^{−3}
        let a = TruncLaurent::parse("t^-5", 3).unwrap();
        let v = b_inf_closed(-3, &a, BesselKind::Plain).unwrap();
        assert_eq!(v.to_rational(), Some((2, 6)));
        assert_eq!(v, b_inf_direct(-3, &a, BesselKind::Plain).unwrap());
        // l = −2, k = 1 sits on the boundary row: −q^{−2}
        let a = TruncLaurent::parse("t^-3", 3).unwrap();
        let v = b_inf_closed(-2, &a, BesselKind::Plain).unwrap();
        assert_eq!(v.to_rational(), Some((-1, 4)));
        assert_eq!(v, b_inf_direct(-2, &a, BesselKind::Plain).unwrap());
        // l = −1, k = 0, α′ = 1: q^{-1} Kl(1) = −1/3
        let a = TruncLaurent::parse("t^-2", 3).unwrap();
        let v = b_inf_closed(-1, &a, BesselKind::Plain).unwrap();
        assert_eq!(v, ScaledCyclotomic::from_int(3, -1).scale(2));
        assert_eq!(v, b_inf_direct(-1, &a, BesselKind::Plain).unwrap());
        // vanishing row
        let a = TruncLaurent::parse("t^3", 3).unwrap();
        assert!(b_inf_closed(1, &a, BesselKind::Plain).unwrap().is_zero());
        assert!(b_inf_direct(1, &a, BesselKind::Plain).unwrap().is_zero());
    }
}
