//! The Fock module `F_p` as the last tensor slot: sector-checked entry points
//! for vertex series, correlators, `g_k`, the diamond product and sewing.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::completion::{g_k_eval, FunctionalG};
use crate::correlator::{q_vector, reconstruct_rational, QRoute, RationalCorrelator};
use crate::error::{Error, Result};
use crate::graded::{DualVector, GradedVector, Partition, Sector, TruncationPolicy};
use crate::scalar::{Scalar, C64};
use crate::sewing::{diamond, sew_vectors, Diamond, Disk};
use crate::tail::TailReport;
use crate::vertex::{Algebra, LaurentSeriesTrunc};

type Q = BigRational;

/// `{"module":"fock","p":"1"}`; `p` is a decimal integer or `a/b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub module: String,
    pub p: String,
}

impl ModuleSpec {
    pub fn fock(p: Rational64) -> Self {
        let p = if *p.denom() == 1 {
            p.numer().to_string()
        } else {
            format!("{}/{}", p.numer(), p.denom())
        };
        ModuleSpec { module: "fock".into(), p }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModuleSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.momentum()?;
        Ok(spec)
    }

    pub fn momentum(&self) -> Result<Rational64> {
        if self.module != "fock" {
            return Err(Error::Spec(format!("unknown module kind {:?}", self.module)));
        }
        parse_rational(&self.p)
    }

    pub fn sector(&self) -> Result<Sector> {
        Ok(Sector::Momentum(self.momentum()?))
    }

    /// `p^2 / 2`.
    pub fn base_weight(&self) -> Result<Rational64> {
        Ok(self.sector()?.base_weight())
    }

    /// The lowest state `|p>`.
    pub fn lowest<S: Scalar>(&self) -> Result<GradedVector<S>> {
        Ok(GradedVector::basis(Partition::empty(), self.sector()?))
    }
}

fn parse_rational(s: &str) -> Result<Rational64> {
    let bad = || Error::Parse(format!("momentum {s:?}"));
    let (n, d) = match s.trim().split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().map_err(|_| bad())?, d.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if d == 0 {
        return Err(bad());
    }
    Ok(Rational64::new(n, d))
}

fn algebra_slot<S: Scalar>(u: &GradedVector<S>) -> Result<()> {
    if u.sector().is_vacuum() {
        Ok(())
    } else {
        Err(Error::AlgebraSectorRequired(u.sector()))
    }
}

fn module_slot(s: Sector) -> Result<()> {
    if s.is_vacuum() {
        Err(Error::ModuleSectorRequired)
    } else {
        Ok(())
    }
}

/// `Y_W(u, z) w` truncated at `policy.max_weight` levels above `p^2/2`.
pub fn module_vertex_series<S: Scalar>(
    alg: &Algebra,
    u: &GradedVector<S>,
    w: &GradedVector<S>,
    policy: &TruncationPolicy,
) -> Result<LaurentSeriesTrunc<S>> {
    algebra_slot(u)?;
    module_slot(w.sector())?;
    alg.vertex_series(u, w, policy)
}

/// `<w', Y_W(u1,z1)...Y_W(uk,zk) w>` as an exact rational function.
pub fn module_correlator(
    alg: &Algebra,
    wp: &DualVector<Q>,
    us: &[GradedVector<Q>],
    w: &GradedVector<Q>,
) -> Result<RationalCorrelator> {
    module_slot(w.sector())?;
    for u in us {
        algebra_slot(u)?;
    }
    reconstruct_rational(alg, wp, us, w)
}

pub fn module_q_vector(
    alg: &Algebra,
    us: &[GradedVector<C64>],
    w: &GradedVector<C64>,
    z: &[C64],
    policy: &TruncationPolicy,
) -> Result<GradedVector<C64>> {
    module_slot(w.sector())?;
    for u in us {
        algebra_slot(u)?;
    }
    let route = if alg.is_corrupted() { QRoute::Rational } else { QRoute::FreeField };
    q_vector(alg, us, w, z, policy, route)
}

/// `sum_n lambda(P_n Q(us, w; z))` for a module-sector functional.
pub fn g_k_w_eval(
    alg: &Algebra,
    lambda: &FunctionalG<C64>,
    us: &[GradedVector<C64>],
    w: &GradedVector<C64>,
    point: &[C64],
    policy: &TruncationPolicy,
) -> Result<TailReport> {
    module_slot(lambda.sector())?;
    module_slot(w.sector())?;
    for u in us {
        algebra_slot(u)?;
    }
    g_k_eval(alg, lambda, us, w, point, policy)
}

/// `u <>_d lambda` for `lambda` in the module dual; the result pairs with
/// module vectors.
pub fn diamond_w(u: &GradedVector<C64>, lambda: &FunctionalG<C64>, d: &Disk, policy: &TruncationPolicy) -> Result<Diamond> {
    algebra_slot(u)?;
    module_slot(lambda.sector())?;
    diamond(u, lambda, d, policy)
}

/// `Y_W(r1^{L(0)} h, z) r2^{L(0)} h_w`, truncated at `policy.max_weight`.
pub fn sew_module(
    alg: &Algebra,
    h: &GradedVector<C64>,
    hw: &GradedVector<C64>,
    d: &Disk,
    policy: &TruncationPolicy,
) -> Result<(GradedVector<C64>, TailReport)> {
    algebra_slot(h)?;
    module_slot(hw.sector())?;
    sew_vectors(alg, h, hw, d, policy)
}

/// `<p', Y_W(a, z1) Y_W(a, z2) |p>` in closed form: `1/(z1-z2)^2 + p^2/(z1 z2)`.
pub fn charged_two_point(p: Rational64) -> RationalCorrelator {
    let p2 = BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom())).pow(2);
    let zp = RationalCorrelator::pole_at_zero(2, 0, 1, Q::one()).mul(&RationalCorrelator::pole_at_zero(2, 1, 1, p2));
    RationalCorrelator::diagonal(2, 0, 1, 2).add(&zp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::scale_l0;
    use crate::scalar::ScaleFactor;

    #[test]
    fn spec_json() {
        let s = ModuleSpec::from_json(r#"{"module":"fock","p":"1"}"#).unwrap();
        assert_eq!(s.base_weight().unwrap(), Rational64::new(1, 2));
        assert_eq!(ModuleSpec::fock(Rational64::new(2, 1)).base_weight().unwrap(), Rational64::new(2, 1));
        assert_eq!(serde_json::to_string(&ModuleSpec::fock(Rational64::new(1, 3))).unwrap(), r#"{"module":"fock","p":"1/3"}"#);
        assert!(ModuleSpec::from_json(r#"{"module":"lattice","p":"1"}"#).is_err());
        assert!(ModuleSpec::from_json(r#"{"module":"fock","p":"x"}"#).is_err());
    }

    #[test]
    fn one_point_and_vacuum() {
        let alg = Algebra::heisenberg();
        for p in [1, 2] {
            let spec = ModuleSpec::fock(Rational64::from_integer(p));
            let w: GradedVector<Q> = spec.lowest().unwrap();
            let a = GradedVector::<Q>::modes(&[1]);
            let r = module_correlator(&alg, &DualVector::from_vector(w.clone()), &[a], &w).unwrap();
            assert_eq!(r, RationalCorrelator::pole_at_zero(1, 0, 1, Q::from_integer(BigInt::from(p))));
            let s = module_vertex_series(&alg, &GradedVector::vacuum(), &w, &TruncationPolicy::default()).unwrap();
            assert_eq!(s.coeff(0), w);
            assert!(!s.has_negative_powers());
        }
        let w = GradedVector::<Q>::modes(&[1]);
        assert!(module_vertex_series(&alg, &w, &w, &TruncationPolicy::default()).is_err());
    }

    #[test]
    fn sewing_the_vacuum_scales() {
        let alg = Algebra::heisenberg();
        let spec = ModuleSpec::fock(Rational64::from_integer(1));
        let mut w: GradedVector<C64> = spec.lowest().unwrap();
        w.add_term(Partition::new(vec![2]).unwrap(), C64::new(0.5, 1.0));
        let d = Disk::new(C64::new(0.5, 0.0), 0.2, 0.1);
        let (y, tail) = sew_module(&alg, &GradedVector::vacuum(), &w, &d, &TruncationPolicy::default()).unwrap();
        let expected = scale_l0(&ScaleFactor::Real(0.1), &w).unwrap();
        assert!(y.sub(&expected).unwrap().max_modulus() < 1e-15);
        assert!(tail.accepted);
        assert!((expected.coeff(&Partition::empty()).re - 0.1f64.sqrt()).abs() < 1e-15);
    }
}
