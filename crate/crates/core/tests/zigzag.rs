use std::collections::BTreeMap;

use cmr_core::algebra::{Field, FieldSpec};
use cmr_core::zigzag::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn code63() -> ZigzagCode {
    ZigzagCode::build(3, 3, &Field::gf256(), 7).unwrap()
}

fn random_data(code: &ZigzagCode, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..code.k() * code.alpha())
        .map(|_| code.field().random(&mut rng))
        .collect()
}

fn repair(code: &ZigzagCode, nodes: &[Vec<u32>], failed: &[usize]) -> (Vec<Vec<u32>>, usize) {
    let sched = code.repair_schedule(failed).unwrap();
    let payloads: Vec<Option<&[u32]>> = (0..code.n())
        .map(|v| (!failed.contains(&v)).then(|| nodes[v].as_slice()))
        .collect();
    let got = sched.gather(&payloads).unwrap();
    let used: usize = got.values().map(Vec::len).sum();
    (code.execute_repair(&sched, &got).unwrap(), used)
}

fn unit(code: &ZigzagCode, row: usize, node: usize) -> Vec<u32> {
    let mut data = vec![0; code.k() * code.alpha()];
    data[node * code.alpha() + row] = 1;
    data
}

#[test]
fn six_three_shape_and_mds() {
    let code = code63();
    assert_eq!((code.n(), code.alpha()), (6, 9));
    let subsets = k_subsets(6, 3);
    assert_eq!(subsets.len(), 20);
    for s in &subsets {
        assert!(code.subset_full_rank(s), "{s:?}");
    }
}

#[test]
fn smallest_code_is_mds() {
    let code = ZigzagCode::build(2, 2, &Field::gf256(), 1).unwrap();
    assert_eq!((code.n(), code.alpha()), (4, 2));
    assert_eq!(
        k_subsets(4, 2)
            .iter()
            .filter(|s| code.subset_full_rank(s))
            .count(),
        6
    );
}

#[test]
fn binary_field_build_runs_out_of_retries() {
    let f2 = Field::new(FieldSpec::prime(2).unwrap());
    match ZigzagCode::build(3, 3, &f2, 0) {
        Err(ZigzagError::RetriesExhausted { attempts, detail }) => {
            assert_eq!(attempts, 33);
            assert!(detail.contains("not full rank"), "{detail}");
        }
        other => panic!("expected retry exhaustion, got {other:?}"),
    }
}

#[test]
fn encode_matches_figure_rows() {
    let code = code63();
    let zero = code.encode(&[0; 27]).unwrap();
    assert!(zero.iter().flatten().all(|&v| v == 0));

    // x_{8,2} appears in row 6 of the second parity.
    let nodes = code.encode(&unit(&code, 8, 2)).unwrap();
    let nonzero: Vec<usize> = (0..9).filter(|&s| nodes[4][s] != 0).collect();
    assert_eq!(nonzero, vec![6]);
    // Row 0 of that parity holds x_{0,0}, x_{6,1}, x_{2,2}.
    for (row, node) in [(0, 0), (6, 1), (2, 2)] {
        let nodes = code.encode(&unit(&code, row, node)).unwrap();
        assert_ne!(nodes[4][0], 0);
    }
    // The first parity is row-aligned.
    for s in 0..9 {
        for j in 0..3 {
            let nodes = code.encode(&unit(&code, s, j)).unwrap();
            let rows: Vec<usize> = (0..9).filter(|&i| nodes[3][i] != 0).collect();
            assert_eq!(rows, vec![s]);
        }
    }
}

#[test]
fn each_symbol_once_per_parity() {
    for (r, k) in [(2, 3), (3, 3), (4, 3), (3, 4)] {
        let code = ZigzagCode::build(r, k, &Field::gf256(), 2).unwrap();
        let alpha = code.alpha();
        for l in 0..r {
            let mut seen = vec![0usize; k * alpha];
            for s in 0..alpha {
                let terms: Vec<_> = code.parity_terms(l, s).collect();
                assert_eq!(terms.len(), k);
                for (j, i, c) in terms {
                    assert_ne!(c, 0);
                    seen[j * alpha + i] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }
}

#[test]
fn single_repair_sets() {
    let code = code63();
    let s0 = code.single_repair_schedule(0).unwrap();
    assert_eq!(s0.rows(3), vec![0, 5, 7]);
    let s1 = code.single_repair_schedule(1).unwrap();
    for p in 3..6 {
        assert_eq!(s1.rows(p), vec![0, 1, 2]);
    }
    assert!(code.single_repair_schedule(3).is_err());
    for j in 0..3 {
        let s = code.single_repair_schedule(j).unwrap();
        assert_eq!(s.total_download(), 15);
        assert!(s.per_helper().values().all(|&c| c == 3));
    }
}

#[test]
fn single_repair_set_sizes() {
    for (r, k) in [(2, 4), (3, 4), (4, 3), (3, 5)] {
        let lay = ZigzagLayout::new(r, k).unwrap();
        for j in 0..k {
            for l in 0..r {
                assert_eq!(lay.single_repair_rows(j, l).len(), r.pow(k as u32 - 2));
            }
        }
    }
}

#[test]
fn pair_schedule_on_six_three() {
    let code = code63();
    let s = code.multi_repair_schedule(&[0, 1]).unwrap();
    assert_eq!(s.total_download(), 24);
    assert!(s.per_helper().values().all(|&c| c == 6));
    assert_eq!(s.stage_rows(2, Stage::Second), vec![8]);
    let second: Vec<usize> = (3..6)
        .flat_map(|p| s.stage_rows(p, Stage::Second))
        .collect();
    assert_eq!(second, vec![8, 6, 7]);
    assert_eq!(s.stage_rows(3, Stage::First), vec![0, 1, 2, 5, 7]);
    assert_eq!(verify_solvability(&code, &s), Solvability::Solvable);
}

#[test]
fn figure_alternative_stage_two_is_also_solvable() {
    let code = code63();
    let canonical = code.multi_repair_schedule(&[0, 1]).unwrap();
    let mut downloads = BTreeMap::new();
    let mut sys = canonical.stage_rows(2, Stage::First);
    sys.push(6);
    downloads.insert(
        2,
        sys.iter().map(|&i| (i, Stage::First)).collect::<Vec<_>>(),
    );
    let lay = code.layout();
    for l in 0..3 {
        downloads.insert(
            3 + l,
            sys.iter()
                .map(|&i| (lay.shift(i, 2, l), Stage::First))
                .collect(),
        );
    }
    let alt = RepairSchedule::custom(&[0, 1], downloads);
    let extra: Vec<usize> = (2..6)
        .map(|p| {
            let base = canonical.stage_rows(p, Stage::First);
            alt.rows(p).into_iter().find(|r| !base.contains(r)).unwrap()
        })
        .collect();
    assert_eq!(extra, vec![6, 6, 7, 8]);
    assert!(verify_schedule_counts(&alt, &code).pass);
    assert_eq!(verify_solvability(&code, &alt), Solvability::Solvable);
}

#[test]
fn triple_and_precondition() {
    let code = code63();
    let s = code.multi_repair_schedule(&[0, 1, 2]).unwrap();
    assert_eq!(s.helpers(), vec![3, 4, 5]);
    assert_eq!(s.total_download(), 27);
    let report = verify_schedule_counts(&s, &code);
    assert!(report.pass);
    assert_eq!(report.expected_per_helper, 9);
    let small = ZigzagCode::build(2, 3, &Field::gf256(), 1).unwrap();
    assert!(matches!(
        small.multi_repair_schedule(&[0, 1, 2]),
        Err(ZigzagError::UnsupportedPattern(_))
    ));
}

#[test]
fn repairs_recover_exactly() {
    let code = code63();
    for seed in 0..5 {
        let data = random_data(&code, seed);
        let nodes = code.encode(&data).unwrap();
        for (failed, bw) in [
            (vec![0], 15),
            (vec![1], 15),
            (vec![2], 15),
            (vec![0, 1], 24),
            (vec![0, 2], 24),
            (vec![1, 2], 24),
            (vec![0, 1, 2], 27),
        ] {
            let (out, used) = repair(&code, &nodes, &failed);
            assert_eq!(used, bw);
            for (pos, &f) in failed.iter().enumerate() {
                assert_eq!(out[pos], nodes[f]);
            }
        }
    }
    let zero = code.encode(&[0; 27]).unwrap();
    let (out, _) = repair(&code, &zero, &[0, 1]);
    assert!(out.iter().flatten().all(|&v| v == 0));
}

#[test]
fn parity_failures_use_decode() {
    let code = code63();
    let nodes = code.encode(&random_data(&code, 9)).unwrap();
    for failed in [vec![3], vec![1, 4], vec![3, 4, 5]] {
        let sched = code.repair_schedule(&failed).unwrap();
        assert_eq!(sched.method(), RepairMethod::Decode);
        let (out, used) = repair(&code, &nodes, &failed);
        assert_eq!(used, code.k() * code.alpha());
        for (pos, &f) in failed.iter().enumerate() {
            assert_eq!(out[pos], nodes[f]);
        }
    }
}

#[test]
fn decode_any_k_round_trip() {
    let code = code63();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for subset in k_subsets(6, 3) {
        for _ in 0..100 {
            let data: Vec<u32> = (0..27).map(|_| rng.gen_range(0..256)).collect();
            let nodes = code.encode(&data).unwrap();
            let picked: Vec<(usize, &[u32])> =
                subset.iter().map(|&v| (v, nodes[v].as_slice())).collect();
            assert_eq!(code.decode_any_k(&picked).unwrap(), data);
        }
    }
    let nodes = code.encode(&random_data(&code, 1)).unwrap();
    assert!(code
        .decode_any_k(&[(0, &nodes[0]), (0, &nodes[0]), (1, &nodes[1])])
        .is_err());
}

#[test]
fn count_report_for_single_failures() {
    let code = ZigzagCode::build(4, 3, &Field::gf256(), 3).unwrap();
    let s = code.single_repair_schedule(2).unwrap();
    let report = verify_schedule_counts(&s, &code);
    assert!(report.pass);
    assert_eq!(report.expected_per_helper, code.alpha() / 4);
}

#[test]
fn deleting_a_row_breaks_the_matching() {
    let code = code63();
    let mut s = code.multi_repair_schedule(&[0, 1]).unwrap();
    let row = s.rows(4)[0];
    assert!(s.remove_row(4, row));
    assert_eq!(
        verify_solvability(&code, &s),
        Solvability::Deficient(Deficiency::Matching {
            size: 17,
            needed: 18
        })
    );
    assert!(!verify_schedule_counts(&s, &code).pass);
}

#[test]
fn all_ones_over_gf2_is_rank_deficient() {
    let f2 = Field::prime(2).unwrap();
    let lay = ZigzagLayout::new(3, 3).unwrap();
    let code = ZigzagCode::from_coefficients(lay, &f2, vec![1; 3 * 9 * 3]).unwrap();
    let s = code.multi_repair_schedule(&[0, 1]).unwrap();
    match verify_solvability(&code, &s) {
        Solvability::Deficient(Deficiency::Rank { rank, needed }) => assert!(rank < needed),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

/// Closed-form stage-2 rows for failed set {0, a, b}, written out directly.
fn closed_form_t3(lay: &ZigzagLayout, a: usize, b: usize) -> Vec<usize> {
    let r = lay.r();
    (0..lay.alpha())
        .filter(|&s| {
            let v = lay.to_vec(s);
            let sum = v.iter().sum::<usize>() % r;
            let (ia, ib) = (v[a - 1], v[b - 1]);
            [
                sum == 1 && ia != 0 && ib == r - 1,
                sum == 2 && ia == r - 1 && ib != 0,
                sum == 1 && ia == r - 1 && ib == r - 2,
                sum != 0 && ia == r - 2 && ib == r - 2,
                sum == 3 && ia == r - 3 && ib == r - 1,
            ]
            .iter()
            .any(|&c| c)
        })
        .collect()
}

#[test]
fn triple_closed_form_is_used_when_node_zero_fails() {
    for k in [4, 5] {
        let code = ZigzagCode::build(4, k, &Field::gf256(), 11).unwrap();
        let lay = *code.layout();
        for (a, b) in [(1, 2), (1, k - 1), (2, 3)] {
            let s = code.multi_repair_schedule(&[0, a, b]).unwrap();
            let helper = (0..k).find(|j| ![0, a, b].contains(j)).unwrap();
            assert_eq!(
                s.stage_rows(helper, Stage::Second),
                closed_form_t3(&lay, a, b)
            );
            assert_eq!(verify_solvability(&code, &s), Solvability::Solvable);
        }
    }
}

#[test]
fn u_set_sizes_match_closed_form() {
    for (r, k, t) in [(3, 3, 2), (3, 4, 3), (4, 4, 2)] {
        let lay = ZigzagLayout::new(r, k).unwrap();
        let failed: Vec<usize> = (0..t).collect();
        for mask in 0..1u32 << t {
            let subset: Vec<usize> = (0..t).filter(|&j| mask >> j & 1 == 1).collect();
            let expected = r.pow((k - 1 - subset.len()) as u32) / r.pow((t - subset.len()) as u32)
                * (r - 1).pow((t - subset.len()) as u32);
            for l in 0..r {
                assert_eq!(
                    u_set(&lay, &failed, &subset, l).len(),
                    expected,
                    "{r} {k} {t} {subset:?} {l}"
                );
            }
        }
    }
}

#[test]
fn all_supported_parameters_balance_and_solve() {
    for r in 2..=4 {
        for k in 2..=5 {
            let code = ZigzagCode::build(r, k, &Field::gf256(), 100).unwrap();
            let data = random_data(&code, 3);
            let nodes = code.encode(&data).unwrap();
            for failed in code.supported_patterns() {
                let s = code.multi_repair_schedule(&failed).unwrap();
                let report = verify_schedule_counts(&s, &code);
                assert!(report.pass, "{r} {k} {failed:?} {report:?}");
                assert_eq!(verify_solvability(&code, &s), Solvability::Solvable);
                let (out, used) = repair(&code, &nodes, &failed);
                assert_eq!(
                    used,
                    (r + k - failed.len()) * failed.len() * code.alpha() / r
                );
                for (pos, &f) in failed.iter().enumerate() {
                    assert_eq!(out[pos], nodes[f]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decode_from_random_subsets(r in 2usize..=4, k in 2usize..=4, seed in any::<u64>()) {
        let code = ZigzagCode::build(r, k, &Field::gf256(), seed % 1000).unwrap();
        let data = random_data(&code, seed);
        let nodes = code.encode(&data).unwrap();
        let subsets = k_subsets(code.n(), k);
        let subset = &subsets[(seed as usize) % subsets.len()];
        let picked: Vec<(usize, &[u32])> = subset.iter().map(|&v| (v, nodes[v].as_slice())).collect();
        prop_assert_eq!(code.decode_any_k(&picked).unwrap(), data);
    }
}
