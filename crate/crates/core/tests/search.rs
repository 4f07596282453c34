mod common;

use gridknot::generator::{make_fixed_set, ClassSampling, GenConfig};
use gridknot::moves::{scramble, stabilize};
use gridknot::search::{canonical_form, canonical_form_with_shift, replay};
use gridknot::{decide, ClassLabel, ClassRegistry, Corner, GridDiagram, Marker, Move, MoveSet, SearchBudget, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seed(name: &str) -> GridDiagram {
    ClassRegistry::builtin().seed_by_name(name).unwrap().clone()
}

/// All cyclic translations of `d`, by direct index arithmetic.
fn translations(d: &GridDiagram) -> Vec<GridDiagram> {
    let n = d.n();
    let mut out = vec![];
    for rs in 0..n {
        for cs in 0..n {
            let x = (0..n).map(|i| (d.x()[(i + n - rs) % n] - 1 + cs) % n + 1).collect();
            let o = (0..n).map(|i| (d.o()[(i + n - rs) % n] - 1 + cs) % n + 1).collect();
            out.push(GridDiagram::new(x, o).unwrap());
        }
    }
    out
}

#[test]
fn canonical_form_is_lexicographic_minimum_over_translations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(2..10);
        let d = common::random_diagram(n, &mut rng);
        let all = translations(&d);
        let best = all
            .iter()
            .min_by(|a, b| (a.x(), a.o()).cmp(&(b.x(), b.o())))
            .unwrap()
            .clone();
        assert_eq!(canonical_form(&d), best);
        for t in &all {
            assert_eq!(canonical_form(t), best);
        }
        let (c, rs, cs) = canonical_form_with_shift(&d);
        let mut shifts = vec![];
        if rs != 0 {
            shifts.push(Move::TranslateRows { shift: rs });
        }
        if cs != 0 {
            shifts.push(Move::TranslateCols { shift: cs });
        }
        assert_eq!(replay(&d, &shifts).unwrap(), c);
    }
}

#[test]
fn seeds_of_trefoil_and_figure_eight_are_knotted() {
    for name in ["3_1", "4_1"] {
        let out = decide(&seed(name), SearchBudget::default());
        assert_eq!(out.verdict, Verdict::Knotted, "{name}");
        assert_eq!(out.min_complexity, seed(name).n());
    }
}

#[test]
fn scrambled_knots_are_exhausted_as_knotted() {
    let reg = ClassRegistry::builtin();
    let mut counts = vec![];
    for (name, complexity) in [("3_1", 8), ("4_1", 8), ("5_2", 9)] {
        let label: ClassLabel = name.parse().unwrap();
        let cfg = GenConfig {
            classes: vec![label],
            switch_moves: 200,
            move_set: MoveSet::WithExternal,
            ..GenConfig::default()
        };
        for s in make_fixed_set(&cfg, reg, 5, complexity, 4, ClassSampling::RoundRobin).unwrap() {
            let out = decide(&s.diagram, SearchBudget::default());
            assert_eq!(out.verdict, Verdict::Knotted, "{name}: {}", s.diagram);
            assert_eq!(out.min_complexity, reg.seed(label).n());
            assert!(out.states_visited > 1);
            counts.push(out.states_visited);
        }
    }
    // regression constants for these exact walks
    assert_eq!(counts, vec![43, 76, 66, 215, 43, 13, 31, 34, 26, 124, 29, 81]);
}

#[test]
fn certificates_replay_to_the_trivial_diagram() {
    let reg = ClassRegistry::builtin();
    let cfg = GenConfig {
        classes: vec![ClassLabel::UNKNOT],
        switch_moves: 300,
        move_set: MoveSet::WithExternal,
        ..GenConfig::default()
    };
    for complexity in 2..=8 {
        for s in make_fixed_set(&cfg, reg, 17, complexity, 20, ClassSampling::RoundRobin).unwrap() {
            let out = decide(&s.diagram, SearchBudget::default());
            let Verdict::Unknot { certificate } = out.verdict else {
                panic!("unknot not recognised: {}", s.diagram)
            };
            let end = replay(&s.diagram, &certificate).unwrap();
            assert_eq!(end, GridDiagram::trivial());
            // never grows
            let mut cur = s.diagram.clone();
            for m in &certificate {
                let next = gridknot::moves::apply(&cur, *m).unwrap();
                assert!(next.n() <= cur.n());
                cur = next;
            }
        }
    }
}

#[test]
fn stabilized_trivial_diagrams_unknot_in_few_moves() {
    let mut d = GridDiagram::trivial();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..6 {
        let row = rng.gen_range(1..=d.n());
        d = stabilize(&d, row, Marker::O, Corner::ALL[rng.gen_range(0..4)]).unwrap();
    }
    d = scramble(&d, &mut rng, 100, MoveSet::InternalOnly);
    assert!(decide(&d, SearchBudget::default()).is_unknot());
}

#[test]
fn budget_exhaustion_is_inconclusive() {
    let d = make_fixed_set(
        &GenConfig {
            classes: vec!["3_1".parse().unwrap()],
            ..GenConfig::default()
        },
        ClassRegistry::builtin(),
        1,
        9,
        1,
        ClassSampling::RoundRobin,
    )
    .unwrap()
    .remove(0)
    .diagram;
    let out = decide(&d, SearchBudget::with_max_states(3));
    assert_eq!(out.verdict, Verdict::Inconclusive);
    assert!(out.states_visited <= 3);
}
