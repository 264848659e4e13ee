// Temporary diagnostics scaffold; removed before release.
use htl::model::{ModelParams, ModelVariant, Representation};
use htl::par::Parallelism;
use htl::reconstruct::bp::{ancestral_bp_tied, calibrate_quality, TieBreak};
use htl::reconstruct::distance::relative_hamming_symbols;
use htl::reconstruct::fim::{decode_member, fim_resolve_flip, pair_symbols, recover_group, residual_dof, FimConfig};
use htl::reconstruct::Shape;
use htl::rng::{stream, StreamTag};
use htl::sample::{sample_fim, RootSpec};
use htl::tree::{build_tree, NodeRef};

#[test]
#[ignore]
fn probe_fim_chain() {
    let d = 3u64;
    let h = 4u32;
    let q = 3u16;
    let k = 100_000usize;
    let lambda = 0.9f64;
    let tree = build_tree(d, h).unwrap();
    let mut p = ModelParams::new(ModelVariant::Fim, q, k, lambda, 5);
    p.rewiring = Some(
        (1..=h)
            .map(|level| {
                let mut rng = stream(5, StreamTag::Rewiring, level, 0);
                htl::model::random_rewiring(k, &mut rng)
            })
            .collect(),
    );
    let gt = sample_fim(&tree, &p, RootSpec::Uniform, Parallelism::default()).unwrap();
    let rewiring = p.rewiring.as_ref().unwrap();

    // Leaf-level (level 4) groups: indices 3m..3m+2 are siblings.
    let leaf_syms: Vec<Vec<u16>> = (0..tree.level_size(4))
        .map(|i| pair_symbols(gt.rep(NodeRef::new(4, i)), q))
        .collect();

    let sigma = &rewiring[3]; // level 4 edges
    let mut row_pos = Vec::new();
    let mut col_pos = Vec::new();
    for i in 0..k / 2 {
        row_pos.push(sigma.apply(2 * i as u32) as usize);
        col_pos.push(sigma.apply(2 * i as u32 + 1) as usize);
    }

    let mut candidates: Vec<(Representation, Representation)> = Vec::new();
    let mut true_flips: Vec<bool> = Vec::new();
    for g in 0..tree.level_size(3) {
        let members: Vec<&[u16]> =
            (0..3).map(|c| leaf_syms[(g * 3 + c) as usize].as_slice()).collect();
        let recs = recover_group(&members, q, &FimConfig::default()).unwrap();
        // True flip per group from the residual of member 0.
        let tau0 = gt.edge_pair_perm(NodeRef::new(4, g * 3)).unwrap();
        let (_, _, flip) = residual_dof(&recs[0], tau0).expect("residual in subgroup");
        true_flips.push(flip);
        let mut cands: Vec<Representation> = Vec::new();
        for flip in [false, true] {
            let decoded: Vec<Representation> = (0..3)
                .map(|c| decode_member(&leaf_syms[(g * 3 + c) as usize], &recs[c as usize], flip, sigma))
                .collect();
            // Align members 1, 2 to member 0 per position class.
            let mut aligned = vec![decoded[0].clone()];
            for m in 1..3 {
                let mut letters = decoded[m].letters().to_vec();
                for class in [&row_pos, &col_pos] {
                    let a: Vec<u16> = class.iter().map(|&pp| decoded[m][pp] as u16).collect();
                    let b: Vec<u16> = class.iter().map(|&pp| decoded[0][pp] as u16).collect();
                    let (_, perm) = relative_hamming_symbols(&a, &b, q as usize).unwrap();
                    for &pp in class.iter() {
                        letters[pp] = perm[decoded[m][pp] as usize] as u8;
                    }
                }
                aligned.push(Representation::new(letters));
            }
            let refs: Vec<&Representation> = aligned.iter().collect();
            let shape = Shape::Internal((0..3).map(Shape::Leaf).collect());
            cands.push(ancestral_bp_tied(&shape, &refs, 1.0, lambda, q, TieBreak::Seeded(g)));
        }
        candidates.push((cands[0].clone(), cands[1].clone()));
    }
    println!("true flips: {true_flips:?}");

    let resolved = fim_resolve_flip(&candidates, q, &FimConfig::default()).unwrap();
    println!("resolved:   {resolved:?}");
    let agree = resolved.iter().zip(&true_flips).filter(|(a, b)| a == b).count();
    println!("flip agreement: {agree}/{}", resolved.len());

    // Parent estimates with the TRUE flips; compare pairwise distances.
    let parents: Vec<Representation> = candidates
        .iter()
        .zip(&true_flips)
        .map(|((plain, flipped), &f)| if f { flipped.clone() } else { plain.clone() })
        .collect();
    let psyms: Vec<Vec<u16>> = parents.iter().map(|r| pair_symbols(r, q)).collect();
    let nq = (q * q) as usize;
    let quality = calibrate_quality(&Shape::regular(3, 1), lambda, 1.0, q, 8000, 1);
    println!("calibrated parent quality: {quality:.4}");
    for dist in [2u64, 4, 6] {
        let mut vals = Vec::new();
        for i in 0..parents.len() {
            for j in (i + 1)..parents.len() {
                let a = NodeRef::new(3, i as u64);
                let b = NodeRef::new(3, j as u64);
                if tree.graph_distance(a, b).unwrap() == dist {
                    vals.push(relative_hamming_symbols(&psyms[i], &psyms[j], nq).unwrap().0);
                }
            }
        }
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Model: per-letter match rate m = Q + (1-Q)/q with Q = quality^2 * lambda^dist,
        // pair match = m^2.
        let qq = quality * quality * lambda.powi(dist as i32);
        let m = qq + (1.0 - qq) / q as f64;
        println!(
            "parent dist {dist}: raw mean {mean:.4} range [{lo:.4}, {hi:.4}] (n={}), model {:.4}",
            vals.len(),
            1.0 - m * m
        );
    }
}
