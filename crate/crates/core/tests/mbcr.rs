use cmr_core::algebra::{poly_eval, Field};
use cmr_core::mbcr::{MbcrCode, MbcrError, MbcrLayout};
use cmr_core::zigzag::k_subsets;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_file(code: &MbcrCode, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..code.file_size())
        .map(|_| code.field().random(&mut rng))
        .collect()
}

fn complement(n: usize, s: &[usize]) -> Vec<usize> {
    (0..n).filter(|v| !s.contains(v)).collect()
}

#[test]
fn payloads_match_direct_evaluation() {
    let f = Field::prime(13).unwrap();
    let code = MbcrCode::build(6, 3, 4, 2, &f).unwrap();
    let file = random_file(&code, 1);
    let coeffs = code.coefficients(&file);
    let nodes = code.encode(&file).unwrap();
    for (i, payload) in nodes.iter().enumerate() {
        for (p, e) in code.evaluations(i).into_iter().enumerate() {
            let v = code.evaluate(&coeffs, code.x_points()[e.xi], code.y_points()[e.yi]);
            assert_eq!(payload[p], v, "node {i} position {p}");
        }
    }
}

#[test]
fn monomial_regions_respect_degrees() {
    let code = MbcrCode::build(6, 3, 4, 2, &Field::prime(13).unwrap()).unwrap();
    assert_eq!(code.monomials().len(), 21);
    for &(i, j) in code.monomials() {
        assert!(i < 4 && j < 6);
        assert!(i < 3 || j < 3);
    }
}

#[test]
fn systematic_positions_hold_the_file() {
    let code = MbcrCode::build(6, 3, 4, 2, &Field::prime(13).unwrap()).unwrap();
    let file = random_file(&code, 2);
    let nodes = code.encode(&file).unwrap();
    for (m, &(node, pos)) in code.info_positions().iter().enumerate() {
        assert!(node < 3);
        assert_eq!(nodes[node][pos], file[m]);
    }
    // Ranks accumulate in node order.
    assert_eq!(code.info_positions().iter().filter(|p| p.0 == 0).count(), 9);
    assert_eq!(code.info_positions().iter().filter(|p| p.0 == 1).count(), 7);
    assert_eq!(code.info_positions().iter().filter(|p| p.0 == 2).count(), 5);
}

#[test]
fn repair_6_3_4_2_all_pairs() {
    let code = MbcrCode::build(6, 3, 4, 2, &Field::prime(13).unwrap()).unwrap();
    let file = random_file(&code, 3);
    let nodes = code.encode(&file).unwrap();
    let mut cases = 0;
    for failed in k_subsets(6, 2) {
        let pool = complement(6, &failed);
        for helpers in k_subsets(pool.len(), 4) {
            let helpers: Vec<usize> = helpers.iter().map(|&h| pool[h]).collect();
            let mut avail: Vec<Option<&[u32]>> = nodes.iter().map(|p| Some(p.as_slice())).collect();
            for &v in &failed {
                avail[v] = None;
            }
            let (rebuilt, bw) = code.centralized_repair(&failed, &helpers, &avail).unwrap();
            assert_eq!(bw, 16);
            for (r, &v) in rebuilt.iter().zip(&failed) {
                assert_eq!(r, &nodes[v]);
            }
            cases += 1;
        }
    }
    assert_eq!(cases, 15);
}

#[test]
fn entropy_ranks_6_3_4_2() {
    let code = MbcrCode::build(6, 3, 4, 2, &Field::prime(13).unwrap()).unwrap();
    for (b, want) in [(1, 9), (2, 16), (3, 21)] {
        let rep = code.entropy_accumulation_rank(b).unwrap();
        assert_eq!(rep.expected, want);
        assert!(rep.uniform(), "b = {b}: {:?}", rep.ranks);
        assert_eq!(rep.ranks.len(), k_subsets(6, b).len());
    }
    assert!(code.entropy_accumulation_rank(4).is_err());
}

#[test]
fn helper_message_is_cross_evaluation() {
    let code = MbcrCode::build(5, 2, 3, 1, &Field::prime(17).unwrap()).unwrap();
    let file = random_file(&code, 4);
    let nodes = code.encode(&file).unwrap();
    let polys: Vec<_> = (0..5)
        .map(|i| code.node_polynomials(&nodes[i], i).unwrap())
        .collect();
    for (i, (h, g)) in polys.iter().enumerate() {
        assert_eq!(h.len(), 4);
        assert_eq!(g.len(), 3);
        for (j, (_, gj)) in polys.iter().enumerate() {
            let (x, y) = (code.x_points()[i], code.y_points()[j]);
            assert_eq!(
                poly_eval(code.field(), h, y),
                poly_eval(code.field(), gj, x)
            );
        }
    }
    let msg = code.helper_message(3, &nodes[3], &[0]).unwrap();
    assert_eq!(msg.len(), 2);
    assert_eq!(
        msg[0],
        poly_eval(code.field(), &polys[3].1, code.x_points()[0])
    );
    assert_eq!(
        msg[1],
        poly_eval(code.field(), &polys[3].0, code.y_points()[0])
    );
}

#[test]
fn reconstruct_from_any_k() {
    let code = MbcrCode::build(5, 2, 3, 1, &Field::prime(17).unwrap()).unwrap();
    let file = random_file(&code, 5);
    let nodes = code.encode(&file).unwrap();
    for s in k_subsets(5, 2) {
        let picked: Vec<(usize, &[u32])> = s.iter().map(|&v| (v, nodes[v].as_slice())).collect();
        assert_eq!(code.reconstruct(&picked).unwrap(), file);
    }
    let one = [(0, nodes[0].as_slice())];
    assert!(code.reconstruct(&one).is_err());
}

#[test]
fn small_field_uses_cyclic_points() {
    let f = Field::prime(5).unwrap();
    let code = MbcrCode::build(4, 2, 2, 1, &f).unwrap();
    assert_eq!(code.x_points().len(), 4);
    assert_eq!(code.y_points().len(), 4);
    let file = random_file(&code, 6);
    let nodes = code.encode(&file).unwrap();
    for failed in 0..4 {
        let pool = complement(4, &[failed]);
        for helpers in k_subsets(3, 2) {
            let helpers: Vec<usize> = helpers.iter().map(|&h| pool[h]).collect();
            let avail: Vec<Option<&[u32]>> = nodes
                .iter()
                .enumerate()
                .map(|(v, p)| (v != failed).then_some(p.as_slice()))
                .collect();
            let (rebuilt, bw) = code
                .centralized_repair(&[failed], &helpers, &avail)
                .unwrap();
            assert_eq!(bw, 4);
            assert_eq!(rebuilt[0], nodes[failed]);
        }
    }
    for b in 1..=2 {
        assert!(code.entropy_accumulation_rank(b).unwrap().uniform());
    }
}

#[test]
fn repair_argument_errors() {
    let code = MbcrCode::build(6, 3, 4, 2, &Field::prime(13).unwrap()).unwrap();
    let file = random_file(&code, 7);
    let nodes = code.encode(&file).unwrap();
    let avail: Vec<Option<&[u32]>> = nodes.iter().map(|p| Some(p.as_slice())).collect();
    assert!(matches!(
        code.centralized_repair(&[0, 1], &[1, 2, 3, 4], &avail),
        Err(MbcrError::NotDisjoint(1))
    ));
    assert!(matches!(
        code.centralized_repair(&[0, 1], &[2, 3, 4], &avail),
        Err(MbcrError::WrongHelperCount {
            expected: 4,
            got: 3
        })
    ));
    let mut missing = avail.clone();
    missing[5] = None;
    assert_eq!(
        code.centralized_repair(&[0, 1], &[2, 3, 4, 5], &missing)
            .unwrap_err(),
        MbcrError::MissingNode(5)
    );
    assert!(matches!(
        code.encode(&[0; 3]),
        Err(MbcrError::LengthMismatch {
            expected: 21,
            got: 3
        })
    ));
}

#[test]
fn secret_layout_is_a_valid_code() {
    let (layout, secret) = MbcrLayout::secret(8, 4, 2, 1).unwrap();
    assert_eq!((layout.x_len, layout.y_len), (9, 11));
    assert_eq!(secret.len(), 2 * 2 * (4 - 1));
    assert!(secret.iter().all(|&(node, _)| node == 1 || node == 2));
    let code = MbcrCode::with_layout(8, 3, 4, 2, &Field::prime(17).unwrap(), layout, &[]).unwrap();
    let file = random_file(&code, 9);
    let nodes = code.encode(&file).unwrap();
    let avail: Vec<Option<&[u32]>> = nodes.iter().map(|p| Some(p.as_slice())).collect();
    for failed in k_subsets(8, 2) {
        let helpers: Vec<usize> = complement(8, &failed)[..4].to_vec();
        let (rebuilt, bw) = code.centralized_repair(&failed, &helpers, &avail).unwrap();
        assert_eq!(bw, 16);
        assert_eq!(
            rebuilt,
            vec![nodes[failed[0]].clone(), nodes[failed[1]].clone()]
        );
    }
    for b in 1..=3 {
        assert!(code.entropy_accumulation_rank(b).unwrap().uniform());
    }
}

#[test]
fn layout_validation() {
    let f = Field::prime(13).unwrap();
    let mut layout = MbcrLayout::standard(4, 2, 1, 13).unwrap();
    layout.h_windows[2][0] = 3;
    assert!(matches!(
        MbcrCode::with_layout(4, 2, 2, 1, &f, layout, &[]),
        Err(MbcrError::InvalidParams(_))
    ));
    let (layout, _) = MbcrLayout::secret(4, 2, 1, 1).unwrap();
    assert!(matches!(
        MbcrCode::with_layout(4, 2, 2, 1, &Field::prime(3).unwrap(), layout, &[]),
        Err(MbcrError::FieldTooSmall {
            needed: 5,
            order: 3
        })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_repairs_are_exact(
        (n, k, d, t) in (1usize..=3, 0usize..=2, 0usize..=2, 0usize..=2)
            .prop_map(|(k, dk, t1, slack)| { let d = k + dk; let t = t1 + 1; (d + t + slack, k, d, t) }),
        seed in any::<u64>(),
        binary in any::<bool>(),
    ) {
        let field = if binary { Field::gf256() } else { MbcrCode::default_field(n, d, t) };
        let code = MbcrCode::build(n, k, d, t, &field).unwrap();
        let file = random_file(&code, seed);
        let nodes = code.encode(&file).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let failed = order[..t].to_vec();
        let helpers = order[t..t + d].to_vec();
        let avail: Vec<Option<&[u32]>> = nodes.iter().map(|p| Some(p.as_slice())).collect();
        let (rebuilt, bw) = code.centralized_repair(&failed, &helpers, &avail).unwrap();
        prop_assert_eq!(bw, 2 * d * t);
        for (r, &v) in rebuilt.iter().zip(&failed) {
            prop_assert_eq!(r, &nodes[v]);
        }
        let picked: Vec<(usize, &[u32])> = order[..k].iter().map(|&v| (v, nodes[v].as_slice())).collect();
        prop_assert_eq!(code.reconstruct(&picked).unwrap(), file);
    }
}
