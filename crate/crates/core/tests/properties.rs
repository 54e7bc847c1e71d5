use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twoweight::lattice::{random_instance, RandomParams};
use twoweight::operators::{apply_scalar, cell_averages, lp_norm, maximal, mixed_norm_of_talpha};
use twoweight::prooftools::{chain_certificate, doob_check, level_sets, reduction_compare, rubio_majorant};
use twoweight::testing::testing_c1;
use twoweight::{Instance, Measure, SimpleFunction};

fn exponent_pair() -> impl Strategy<Value = (f64, f64)> {
    (1.2f64..4.0, 1.0f64..3.0)
}

fn instance() -> impl Strategy<Value = Instance> {
    (any::<u64>(), 2usize..4, 1usize..5, exponent_pair()).prop_map(|(seed, branching, depth, (p, q))| {
        let params = RandomParams { branching, depth, p, q, ..Default::default() };
        random_instance(seed, &params).unwrap()
    })
}

fn function(inst: &Instance, seed: u64) -> SimpleFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..inst.lattice().num_leaves()).map(|_| rng.gen::<f64>() * 4.0).collect();
    SimpleFunction::new(inst.lattice(), values).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn masses_are_additive(inst in instance()) {
        let l = inst.lattice();
        for which in [inst.mu(), inst.nu()] {
            for cell in l.cells().filter(|&c| !l.is_leaf(c)) {
                let sum: f64 = l.children(cell).iter().map(|&c| which.mass(c)).sum();
                prop_assert!(close(which.mass(cell), sum, 1e-12));
            }
        }
    }

    #[test]
    fn each_generation_partitions_the_leaves(inst in instance()) {
        let l = inst.lattice();
        for n in 0..l.num_generations() {
            let mut covered: Vec<usize> = l.generation(n).flat_map(|c| l.span(c)).collect();
            covered.sort_unstable();
            prop_assert_eq!(covered, (0..l.num_leaves()).collect::<Vec<_>>());
        }
        let root = l.generation(0).next().unwrap();
        prop_assert_eq!(l.cells_within(root).unwrap().len(), l.len());
    }

    #[test]
    fn document_round_trip(inst in instance(), seed in any::<u64>()) {
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.mu().leaf_masses(), inst.mu().leaf_masses());
        prop_assert_eq!(back.nu().leaf_masses(), inst.nu().leaf_masses());
        prop_assert_eq!(back.alpha(), inst.alpha());
        let f = function(&inst, seed);
        let back_f = SimpleFunction::from_json(inst.lattice(), &f.to_json(inst.lattice())).unwrap();
        prop_assert_eq!(back_f, f);
    }

    #[test]
    fn scalar_operator_is_linear(inst in instance(), s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (f, g) = (function(&inst, s1), function(&inst, s2));
        let combo = SimpleFunction::new(
            inst.lattice(),
            f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect(),
        ).unwrap();
        let lhs = apply_scalar(&inst, &combo).unwrap();
        let (tf, tg) = (apply_scalar(&inst, &f).unwrap(), apply_scalar(&inst, &g).unwrap());
        let scale = tf.values().iter().chain(tg.values()).fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs());
        for ((l, x), y) in lhs.values().iter().zip(tf.values()).zip(tg.values()) {
            prop_assert!((l - (a * x + b * y)).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn positivity_and_domination(inst in instance(), seed in any::<u64>()) {
        let f = function(&inst, seed);
        prop_assert!(apply_scalar(&inst, &f).unwrap().is_nonnegative());
        let m = maximal(&inst, &f).unwrap();
        prop_assert!(m.is_nonnegative());
        let avgs = cell_averages(&inst, &f).unwrap();
        let l = inst.lattice();
        for cell in l.cells() {
            for pos in l.span(cell) {
                prop_assert!(m.values()[pos] >= avgs[cell.index()]);
            }
        }
    }

    #[test]
    fn jensen_leafwise(inst in instance(), seed in any::<u64>()) {
        let q = inst.exponents().q();
        let f = function(&inst, seed);
        let avgs = cell_averages(&inst, &f).unwrap();
        let avgs_q = cell_averages(&inst, &f.map(|v| v.powf(q))).unwrap();
        let l = inst.lattice();
        for &leaf in l.leaves() {
            let (mut lhs, mut rhs) = (0.0, 0.0);
            for cell in l.chain(leaf) {
                let a = inst.alpha_of(cell).powf(q);
                lhs += a * avgs[cell.index()].powf(q);
                rhs += a * avgs_q[cell.index()];
            }
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn doob_inequality(inst in instance(), seed in any::<u64>()) {
        let d = doob_check(&inst, &function(&inst, seed)).unwrap();
        prop_assert!(d.lhs <= d.rhs * (1.0 + 1e-12));
    }

    #[test]
    fn mixed_norm_with_equal_exponents(inst in instance(), seed in any::<u64>()) {
        let p = inst.exponents().p();
        let inst = inst.with_exponents(twoweight::ExponentPair::new(p, p).unwrap());
        let f = function(&inst, seed);
        let mixed = mixed_norm_of_talpha(&inst, &f).unwrap().value;
        let family = twoweight::operators::vector_family(&inst, &f).unwrap().mixed_norm(&inst, p, p);
        prop_assert!(close(mixed, family, 1e-12));
    }

    #[test]
    fn necessity_on_indicators(inst in instance()) {
        let p = inst.exponents().p();
        for j in inst.lattice().cells().filter(|&j| inst.mu().mass(j) > 0.0) {
            let f = SimpleFunction::indicator(inst.lattice(), j);
            let lhs = mixed_norm_of_talpha(&inst, &f).unwrap().value.powf(p);
            let rhs = testing_c1(&inst, j).unwrap().powf(p) * inst.mu().mass(j);
            prop_assert!(lhs >= rhs * (1.0 - 1e-12));
        }
    }

    #[test]
    fn maximal_cells_cover_level_sets(inst in instance(), seed in any::<u64>()) {
        let f = function(&inst, seed);
        let ls = level_sets(&inst, &f).unwrap();
        let l = inst.lattice();
        for (k, cells) in &ls.maximal_cells {
            let cover: f64 = cells.iter().filter(|&&c| l.chain_top(c) == c).map(|&c| inst.mu().mass(c)).sum();
            prop_assert!(close(cover, ls.mu_of_level(&inst, *k), 1e-12));
        }
    }

    #[test]
    fn chain_composes(inst in instance(), seed in any::<u64>()) {
        let e = inst.exponents();
        prop_assume!(e.p() <= e.q());
        let cert = chain_certificate(&inst, &function(&inst, seed)).unwrap();
        for step in &cert.steps {
            prop_assert!(step.holds(1e-12), "{:?}", step);
        }
        prop_assert!(cert.overall_holds(1e-12));
    }

    #[test]
    fn majorant_properties(inst in instance(), seed in any::<u64>()) {
        let e = inst.exponents();
        prop_assume!(e.q() < e.p());
        let f = function(&inst, seed);
        let r = rubio_majorant(&inst, &f, 1e-12).unwrap();
        for (a, b) in r.majorant.values().iter().zip(f.values()) {
            prop_assert!(a >= b);
        }
        let q = e.q();
        let norm_f = lp_norm(&inst, &f, e.p(), Measure::Mu).unwrap().value;
        let norm_big = lp_norm(&inst, &r.majorant, e.p(), Measure::Mu).unwrap().value;
        prop_assert!(norm_big.powf(q) <= 2.0 * norm_f.powf(q) * (1.0 + 1e-10) + r.tail_norm_bound);
        prop_assert!(r.a1_violations(&inst, 1e-10).is_empty());
    }

    #[test]
    fn reduction_directions(inst in instance(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let e = inst.exponents();
        prop_assume!(e.q() < e.p());
        let r = reduction_compare(&inst, &function(&inst, s1), &function(&inst, s2), 1e-12).unwrap();
        prop_assert_eq!(r.holds_pair, (true, true));
    }

    #[test]
    fn random_instances_are_reproducible(seed in any::<u64>()) {
        let params = RandomParams { branching: 3, depth: 3, p: 2.0, q: 1.0, ..Default::default() };
        let a = random_instance(seed, &params).unwrap().to_json();
        let b = random_instance(seed, &params).unwrap().to_json();
        prop_assert_eq!(a, b);
    }
}
