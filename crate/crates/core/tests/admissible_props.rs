use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_billiard::admissible::{
    close_periodic, insert_idle_runs, minimize_arclength, plan_word, NodeRole, PlanOptions,
};
use torus_billiard::flow::word_of;
use torus_billiard::freegroup::{reduce, Letter, ReducedWord};
use torus_billiard::geometry::Vec3;

fn reduced_word(max: usize) -> impl Strategy<Value = ReducedWord> {
    prop::collection::vec((0usize..3, any::<bool>()).prop_map(|(a, p)| Letter::new(a, p).unwrap()), 1..max)
        .prop_map(reduce)
        .prop_filter("non-empty", |w| !w.is_empty())
}

fn random_word(rng: &mut ChaCha8Rng, len: usize, cyclic: bool) -> ReducedWord {
    loop {
        let mut ls: Vec<Letter> = Vec::new();
        while ls.len() < len {
            let l = Letter::ALL[rng.random_range(0..6)];
            if !ls.last().is_some_and(|p| p.cancels(l)) {
                ls.push(l);
            }
        }
        let w = ReducedWord::from_reduced(ls).unwrap();
        if !cyclic || w.is_cyclically_reduced() {
            return w;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn plan_invariants(w in reduced_word(51), alt in any::<bool>()) {
        let plan = plan_word(&w, PlanOptions { alt_cross_exit: alt }).unwrap();
        plan.check().unwrap();
        prop_assert_eq!(&plan.word, &w);
        prop_assert_eq!(plan.compartments.len(), w.len() + 1);
        for (i, l) in w.letters().iter().enumerate() {
            let s = l.step();
            let (a, b) = (plan.compartments[i], plan.compartments[i + 1]);
            prop_assert_eq!([b[0] - a[0], b[1] - a[1], b[2] - a[2]], s);
        }
        for pair in plan.nodes.windows(2) {
            prop_assert!(pair[0].edge.is_skew(&pair[1].edge));
        }
        prop_assert!(plan.nodes.first().unwrap().role == NodeRole::Anchor);
        prop_assert!(plan.nodes.last().unwrap().role == NodeRole::Anchor);
    }

    #[test]
    fn zero_radius_cell_times(w in reduced_word(51)) {
        let plan = plan_word(&w, PlanOptions::default()).unwrap();
        let orbit = minimize_arclength(&plan, 0.0).unwrap();
        prop_assert!(orbit.grad_norm < 1e-10);
        for (v, &t) in plan.visits.iter().zip(&orbit.cell_times) {
            if let Some(case) = v.case {
                prop_assert!(t <= case.time_bound() + 1e-9, "{} took {}", case, t);
            }
        }
        let sum: f64 = orbit.cell_times.iter().sum();
        prop_assert!((sum - orbit.length).abs() < 1e-9);
    }
}

#[test]
fn positive_radius_orbits_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let len = rng.random_range(1..=30);
        let w = random_word(&mut rng, len, false);
        let mut orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.05).unwrap();
        assert!(orbit.fermat_residual() < 1e-8);
        let rec = orbit.validate().unwrap();
        assert_eq!(word_of(&rec), w);
    }
}

#[test]
fn periodic_orbits_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let len = rng.random_range(1..=10);
        let w = random_word(&mut rng, len, true);
        let orbit = close_periodic(&w, 0.02, PlanOptions::default()).unwrap();
        assert!(orbit.validated);
        let v = Vec3::from_lattice(orbit.plan.period.unwrap());
        let k = orbit.plan.word.len() / w.len();
        assert_eq!(orbit.plan.word, w.power(k));
        let rec = torus_billiard::admissible::validate_orbit(&orbit, 0.02).unwrap();
        let tp = orbit.length;
        for i in 0..50 {
            let t = 2.0 * tp * (i as f64 + 0.5) / 50.0;
            // velocity jumps at reflections
            if rec.events.iter().any(|e| (e.time - t).abs() < 1e-7 || (e.time - t - tp).abs() < 1e-7) {
                continue;
            }
            let (a, b) = (rec.state_at(t), rec.state_at(t + tp));
            assert!((b.q - a.q - v).norm() < 1e-6, "{w}: position drift at t = {t}");
            assert!((b.v - a.v).norm() < 1e-6, "{w}: velocity drift at t = {t}");
        }
    }
}

#[test]
fn idle_runs_keep_the_word() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let w = random_word(&mut rng, 12, false);
        let orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.02).unwrap();
        for target in [0.05, 0.15, 0.3] {
            let mut slow = insert_idle_runs(&orbit, target).unwrap();
            assert!((slow.speed() - target).abs() <= 0.02 * target, "{w}: {} vs {target}", slow.speed());
            assert_eq!(slow.plan.word, w);
            assert_eq!(word_of(&slow.validate().unwrap()), w);
        }
    }
}

#[test]
fn idle_rejects_speeding_up() {
    let w: ReducedWord = "abc".parse().unwrap();
    let orbit = minimize_arclength(&plan_word(&w, PlanOptions::default()).unwrap(), 0.02).unwrap();
    assert!(insert_idle_runs(&orbit, 1.5).is_err());
    assert!(insert_idle_runs(&orbit, 0.0).is_err());
}
