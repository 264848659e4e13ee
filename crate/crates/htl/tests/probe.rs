// Temporary diagnostics scaffold; removed before release.
use htl::model::{ModelParams, ModelVariant};
use htl::par::Parallelism;
use htl::reconstruct::bp::{ancestral_bp, calibrate_quality};
use htl::reconstruct::distance::{expected_disagreement, normalized_hamming};
use htl::reconstruct::Shape;
use htl::sample::{sample_iidm, RootSpec};
use htl::tree::{build_tree, NodeRef};

#[test]
#[ignore]
fn probe_quality_model() {
    let d = 2u64;
    let h = 8u32;
    let q = 4u16;
    let k = 5000usize;
    let lambda = 0.9f64;
    let tree = build_tree(d, h).unwrap();
    let p = ModelParams::new(ModelVariant::Iidm, q, k, lambda, 1);
    let gt = sample_iidm(&tree, &p, RootSpec::Uniform, Parallelism::default()).unwrap();

    // Reconstruct level-6 nodes from their 4 descendant leaves via BP,
    // exactly as the pipeline does with r = 2.
    let shape = Shape::regular(d as usize, 2);
    let mut est6 = Vec::new();
    for idx in 0..tree.level_size(6) {
        let node = NodeRef::new(6, idx);
        let leaves: Vec<&htl::model::Representation> =
            tree.subtree_leaves(node).map(|l| gt.rep(l)).collect();
        est6.push(ancestral_bp(&shape, &leaves, 1.0, lambda, q));
    }
    // Measured per-letter accuracy vs the true level-6 reps.
    let mut agree = 0usize;
    for idx in 0..tree.level_size(6) {
        let node = NodeRef::new(6, idx);
        let truth = gt.rep(node);
        agree += est6[idx as usize]
            .letters()
            .iter()
            .zip(truth.letters())
            .filter(|(a, b)| a == b)
            .count();
    }
    let p_hit = agree as f64 / (tree.level_size(6) as usize * k) as f64;
    let measured_quality = (p_hit - 1.0 / q as f64) / (1.0 - 1.0 / q as f64);
    let calibrated = calibrate_quality(&shape, lambda, 1.0, q, 4000, 7);
    println!("level 6: measured quality {measured_quality:.4}, calibrated {calibrated:.4}");

    // Raw disagreement between estimate pairs at each true distance.
    for dist in [2u64, 4, 6] {
        let mut raws = Vec::new();
        for i in 0..tree.level_size(6) {
            for j in (i + 1)..tree.level_size(6) {
                let a = NodeRef::new(6, i);
                let b = NodeRef::new(6, j);
                if tree.graph_distance(a, b).unwrap() == dist {
                    raws.push(
                        normalized_hamming(&est6[i as usize], &est6[j as usize]).unwrap(),
                    );
                }
            }
        }
        let mean = raws.iter().sum::<f64>() / raws.len() as f64;
        let expect_meas = expected_disagreement(lambda, measured_quality, measured_quality, q, dist as u32);
        let expect_cal = expected_disagreement(lambda, calibrated, calibrated, q, dist as u32);
        println!(
            "dist {dist}: mean raw {mean:.4} (n={}), expected w/ measured {expect_meas:.4}, w/ calibrated {expect_cal:.4}",
            raws.len()
        );
    }

    // One more window: level-4 nodes from the level-6 estimates.
    let mut est4 = Vec::new();
    for idx in 0..tree.level_size(4) {
        let members: Vec<&htl::model::Representation> =
            (0..4).map(|c| &est6[(idx * 4 + c) as usize]).collect();
        est4.push(ancestral_bp(&shape, &members, calibrated, lambda, q));
    }
    let mut agree = 0usize;
    for idx in 0..tree.level_size(4) {
        let node = NodeRef::new(4, idx);
        agree += est4[idx as usize]
            .letters()
            .iter()
            .zip(gt.rep(node).letters())
            .filter(|(a, b)| a == b)
            .count();
    }
    let p_hit4 = agree as f64 / (tree.level_size(4) as usize * k) as f64;
    let measured4 = (p_hit4 - 1.0 / q as f64) / (1.0 - 1.0 / q as f64);
    let calibrated4 = calibrate_quality(&shape, lambda, calibrated, q, 4000, 8);
    println!("level 4: measured quality {measured4:.4}, calibrated {calibrated4:.4}");
    for dist in [2u64, 4, 6] {
        let mut raws = Vec::new();
        for i in 0..tree.level_size(4) {
            for j in (i + 1)..tree.level_size(4) {
                let a = NodeRef::new(4, i);
                let b = NodeRef::new(4, j);
                if tree.graph_distance(a, b).unwrap() == dist {
                    raws.push(normalized_hamming(&est4[i as usize], &est4[j as usize]).unwrap());
                }
            }
        }
        let mean = raws.iter().sum::<f64>() / raws.len() as f64;
        let lo = raws.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expect_meas = expected_disagreement(lambda, measured4, measured4, q, dist as u32);
        let expect_cal = expected_disagreement(lambda, calibrated4, calibrated4, q, dist as u32);
        println!(
            "L4 dist {dist}: raw mean {mean:.4} range [{lo:.4}, {hi:.4}] (n={}), expected measured {expect_meas:.4}, calibrated {expect_cal:.4}",
            raws.len()
        );
    }
}
