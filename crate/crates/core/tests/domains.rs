use std::path::PathBuf;

use inverse_plan::baselines::enumerate_states;
use inverse_plan::domains::{
    all_goals_reachable, bundle_names, generate_gridworld, generate_problem, load_bundle, word_blocks, BundledProblem,
    DomainError, GenParams, GridMap, StateSampler, BUNDLES, FIGURE_1A_MAP, FIGURE_1B_MAP,
};
use inverse_plan::pddl::{ProblemDef, State};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data_path(bundle: &str, p: &BundledProblem) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("data/v1/{bundle}/{}.pddl", p.name))
}

/// Set `REGENERATE_BUNDLES=1` to rewrite the files instead of comparing.
#[test]
fn bundled_files_match_their_sources() {
    let rewrite = std::env::var_os("REGENERATE_BUNDLES").is_some();
    for b in BUNDLES {
        for p in b.problems {
            let Some(text) = p.regenerate() else { continue };
            let text = text.unwrap();
            if rewrite {
                std::fs::write(data_path(b.name, p), &text).unwrap();
            } else {
                assert_eq!(text, p.text, "{}/{} is stale", b.name, p.name);
            }
        }
    }
}

#[test]
fn bundles_have_their_goal_counts_and_solvable_goals() {
    let expected = [("taxi", 3), ("doors-keys-gems", 3), ("block-words", 5), ("intrusion-detection", 20)];
    assert_eq!(bundle_names().collect::<Vec<_>>(), expected.map(|(n, _)| n));
    for (name, goals) in expected {
        let bundle = load_bundle(name).unwrap();
        assert_eq!(bundle.goal_count(), goals);
        assert!(!bundle.benchmark_problems().is_empty());
        for (b, p) in &bundle.problems {
            assert_eq!(p.goals.len(), goals, "{}", b.name);
            assert!(all_goals_reachable(p).unwrap(), "{}", b.name);
            assert!(p.goals.iter().all(|g| !p.satisfies(&p.init, g)), "{}", b.name);
            assert_eq!(p.name, b.name, "file and problem names must agree");
        }
    }
    assert!(matches!(load_bundle("sokoban"), Err(DomainError::Unknown(_))));
    let taxi = load_bundle("taxi").unwrap();
    assert!(matches!(taxi.problem("nope"), Err(DomainError::UnknownProblem { .. })));
}

#[test]
fn taxi_state_space_has_125_states() {
    let bundle = load_bundle("taxi").unwrap();
    assert_eq!(enumerate_states(&bundle.benchmark_problems()[0], 1000).unwrap().len(), 125);
}

#[test]
fn generated_doors_keys_gems_problems_are_solvable() {
    let params = GenParams::DoorsKeysGems { width: 7, height: 7, keys: 2, doors: 2, gems: 3 };
    for seed in 10..16 {
        let g = generate_problem(&params, "gen", &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(g.problem.goals.len(), 3);
        assert!(all_goals_reachable(&g.problem).unwrap());
        let again = generate_problem(&params, "gen", &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(g.text, again.text);
    }
}

#[test]
fn block_words_goals_spell_the_words() {
    let words: Vec<String> = ["draw", "ward", "wad", "raw", "dar"].map(String::from).to_vec();
    assert_eq!(word_blocks(&words).unwrap(), ["a", "d", "r", "w"]);
    let params = GenParams::BlockWords { words: words.clone() };
    let g = generate_problem(&params, "w", &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let p = &g.problem;
    assert_eq!(p.goal_labels(), words);
    let draw = &p.goals[0];
    let mut atoms: Vec<String> = p.goal_atoms(draw).into_iter().map(|a| p.atom_name(a)).collect();
    atoms.sort();
    assert_eq!(atoms, ["(on a w)", "(on d r)", "(on r a)", "(ontable w)"]);
    assert!(word_blocks(&["noon".to_string()]).is_err());
    assert!(word_blocks(&[]).is_err());
}

#[test]
fn degenerate_grids_fail_to_generate() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(generate_gridworld(1, 1, 0.0, 1, &mut rng), Err(DomainError::Generation(_))));
    let params = GenParams::DoorsKeysGems { width: 1, height: 1, keys: 0, doors: 0, gems: 1 };
    assert!(generate_problem(&params, "x", &mut rng).is_err());
    assert!(GridMap::parse("....").is_err());
    assert!(GridMap::parse("s.\n...").is_err());
}

#[test]
fn hand_drawn_maps_round_trip() {
    for ascii in [FIGURE_1A_MAP, FIGURE_1B_MAP] {
        let map = GridMap::parse(ascii).unwrap();
        assert_eq!(map.to_ascii(), ascii);
        assert_eq!(map.gems.len(), 3);
    }
}

/// Every block is held, on the table, or on exactly one other block, and
/// the hand is empty exactly when nothing is held.
fn valid_towers(p: &ProblemDef, s: &State) -> bool {
    let (facts, _) = p.describe_state(s);
    let blocks = ["a", "d", "e", "o", "p", "r", "w"];
    let has = |f: &str| facts.iter().any(|x| x == f);
    let held = blocks.iter().filter(|b| has(&format!("(holding {b})"))).count();
    if held > 1 || has("(handempty)") == (held == 1) {
        return false;
    }
    blocks.iter().all(|b| {
        let placements = has(&format!("(holding {b})")) as usize
            + has(&format!("(ontable {b})")) as usize
            + blocks.iter().filter(|c| has(&format!("(on {b} {c})"))).count();
        let covered = blocks.iter().filter(|c| has(&format!("(on {c} {b})"))).count();
        let holding = has(&format!("(holding {b})"));
        placements == 1 && covered <= 1 && has(&format!("(clear {b})")) == (covered == 0 && !holding)
    })
}

#[test]
fn samplers_produce_valid_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let bw = load_bundle("block-words").unwrap();
    let p = bw.benchmark_problems()[0].clone();
    assert!(valid_towers(&p, &p.init));
    for _ in 0..500 {
        let s = StateSampler::Towers.sample(&p, &mut rng);
        assert!(valid_towers(&p, &s), "{:?}", p.describe_state(&s).0);
    }

    let dkg = load_bundle("doors-keys-gems").unwrap();
    let p = dkg.benchmark_problems()[0].clone();
    let x = p.fluent_by_name("(xpos)").unwrap();
    let y = p.fluent_by_name("(ypos)").unwrap();
    let mut distinct = std::collections::HashSet::new();
    for _ in 0..500 {
        let s = StateSampler::GridItems.sample(&p, &mut rng);
        let cell = format!("c{} c{}", s.fluent(x), s.fluent(y));
        assert!(!s.holds(p.atom_by_name(&format!("(wall {cell})")).unwrap()));
        assert!(!s.holds(p.atom_by_name(&format!("(door {cell})")).unwrap()));
        // Doors only where the initial state had them.
        for a in s.true_atoms() {
            if p.atom_name(a).starts_with("(door ") {
                assert!(p.init.holds(a));
            }
        }
        distinct.insert(s);
    }
    assert!(distinct.len() > 400);

    let id = load_bundle("intrusion-detection").unwrap();
    let p = id.benchmark_problems()[0].clone();
    let sampler = id.sampler();
    for _ in 0..100 {
        let s = sampler.sample(&p, &mut rng);
        assert_eq!(s.num_atoms(), p.num_atoms());
        for a in s.true_atoms() {
            if p.is_static_atom(a) {
                assert!(p.init.holds(a));
            }
        }
    }
}
