use std::path::PathBuf;

use num_rational::BigRational;
use vertex_sew::correlator::{reconstruct_rational, RationalCorrelator};
use vertex_sew::vertex::Algebra;
use vertex_sew::{DualVector, GradedVector, Partition, Sector};

type Q = BigRational;

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn all_alpha_correlators_match_goldens() {
    let alg = Algebra::heisenberg();
    let a = GradedVector::<Q>::modes(&[1]);
    for (tag, sector) in [("vacuum", Sector::Vacuum), ("p1", Sector::momentum(1, 1)), ("p2", Sector::momentum(2, 1))] {
        for k in 0..=4usize {
            let w = GradedVector::<Q>::basis(Partition::empty(), sector);
            let r = reconstruct_rational(&alg, &DualVector::from_vector(w.clone()), &vec![a.clone(); k], &w).unwrap();
            let text = golden(&format!("alpha_{tag}_k{k}.json"));
            assert_eq!(r.to_json_string(), text.trim_end(), "{tag} k={k}");
            assert_eq!(RationalCorrelator::from_json_str(&text).unwrap(), r);
        }
    }
}

#[test]
fn odd_vacuum_counts_vanish() {
    for k in [1, 3] {
        let r = RationalCorrelator::from_json_str(&golden(&format!("alpha_vacuum_k{k}.json"))).unwrap();
        assert!(r.is_zero());
    }
}
