use num_rational::Ratio;
use patchstill::foreground::{class_threshold, occupancy, Mask};
use patchstill::report::{histogram, retention};
use patchstill::rng::{substream, SELECT_DOMAIN};
use patchstill::scoring::ScoringError;
use patchstill::scoring::{mock_score, MockScorer, PatchScorer, ScoringInput};
use patchstill::selection::{
    crop_candidates, select_dynamic, CropSampler, ImageContext, PatchSource, SelectedPatch,
    SelectionParams,
};
use patchstill::softlabel::{label_crops, soft_label, Teacher, TeacherInput};
use patchstill::synthesis::{synth, top_k, SynthesisPlan};
use patchstill::{CropRect, DistilledImage, Raster};
use proptest::prelude::*;

fn mask_strategy(max_side: u32) -> impl Strategy<Value = Mask> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        proptest::collection::vec(0u8..=1, (w * h) as usize)
            .prop_map(move |bits| Mask::new("p/x.png", w, h, bits).unwrap())
    })
}

fn rect_in(w: u32, h: u32) -> impl Strategy<Value = CropRect> {
    (0..w, 0..h).prop_flat_map(move |(x, y)| {
        (1..=w - x, 1..=h - y).prop_map(move |(rw, rh)| CropRect::new(x, y, rw, rh))
    })
}

fn ratios(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..=1.0, 1..max_len)
}

fn textured(w: u32, h: u32, salt: u32) -> Raster {
    Raster::from_fn(w, h, |x, y| {
        let v = (x * 37 + y * 11 + salt * 53) % 256;
        [v as u8, (v / 2) as u8, (255 - v) as u8]
    })
}

proptest! {
    #[test]
    fn occupancy_ignores_pixel_order(
        (w, h, bits) in (1u32..=24, 1u32..=24).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), proptest::collection::vec(0u8..=1, (w * h) as usize))
        }),
        shuffled_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut shuffled = bits.clone();
        shuffled.shuffle(&mut substream(shuffled_seed, "test", "shuffle"));
        let a = occupancy::<f64>(&Mask::new("a", w, h, bits.clone()).unwrap());
        let b = occupancy::<f64>(&Mask::new("a", w, h, shuffled).unwrap());
        prop_assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
    }

    #[test]
    fn occupancy_bounds(mask in mask_strategy(16)) {
        let r = occupancy::<f64>(&mask).ratio;
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert_eq!(r == 1.0, mask.bits().iter().all(|&b| b == 1));
        prop_assert_eq!(r == 0.0, mask.bits().iter().all(|&b| b == 0));
    }

    #[test]
    fn threshold_monotone_in_quantile(rs in ratios(40), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(class_threshold(&rs, lo).unwrap() <= class_threshold(&rs, hi).unwrap());
    }

    #[test]
    fn threshold_scales_with_ratios(rs in ratios(40), q in 0.0f64..=1.0, c in 0.001f64..=1.0) {
        let scaled: Vec<f64> = rs.iter().map(|r| r * c).collect();
        let a = class_threshold(&scaled, q).unwrap();
        let b = c * class_threshold(&rs, q).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn constant_class_threshold(r in 0.0f64..=1.0, n in 1usize..30, q in 0.0f64..=1.0) {
        prop_assert_eq!(class_threshold(&vec![r; n], q).unwrap(), r);
        prop_assert_eq!(class_threshold(&vec![r as f32; n], q as f32).unwrap(), r as f32);
    }

    #[test]
    fn threshold_within_sample_range(rs in ratios(40), q in 0.0f64..=1.0) {
        let t = class_threshold(&rs, q).unwrap();
        let min = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= t && t <= max);
    }

    #[test]
    fn mock_score_monotone_under_dilation(
        (mask, rect, extra) in mask_strategy(16).prop_flat_map(|m| {
            let (w, h) = (m.width(), m.height());
            (Just(m), rect_in(w, h), proptest::collection::vec((0..w, 0..h), 0..20))
        })
    ) {
        let mut bits = mask.bits().to_vec();
        for (x, y) in extra {
            if rect.x <= x && x < rect.x + rect.w && rect.y <= y && y < rect.y + rect.h {
                bits[(y * mask.width() + x) as usize] = 1;
            }
        }
        let dilated = Mask::new("p/x.png", mask.width(), mask.height(), bits).unwrap();
        let before: Ratio<u64> = mask.fraction_in(rect).unwrap().exact();
        let after: Ratio<u64> = dilated.fraction_in(rect).unwrap().exact();
        prop_assert!(after >= before);
        let (sb, sa) = (mock_score::<f64>(rect, &mask).unwrap(), mock_score::<f64>(rect, &dilated).unwrap());
        prop_assert!(sa >= sb && (0.0..=1.0).contains(&sa));
    }

    #[test]
    fn mock_score_is_deterministic((mask, rect) in mask_strategy(16).prop_flat_map(|m| {
        let (w, h) = (m.width(), m.height());
        (Just(m), rect_in(w, h))
    })) {
        let a: f32 = mock_score(rect, &mask).unwrap();
        let b: f32 = mock_score(rect, &mask).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sampled_rects_fit(w in 2u32..200, h in 2u32..200, seed in any::<u64>()) {
        let mut rng = substream(seed, "test", "sampler");
        for sampler in [CropSampler::SELECTION, CropSampler::LABEL] {
            let r = sampler.sample(w, h, &mut rng);
            prop_assert!(r.w >= 1 && r.h >= 1 && r.fits_within(w, h), "{r} in {w}x{h}");
        }
    }

    #[test]
    fn crop_path_winner_dominates(
        mask in mask_strategy(24).prop_filter("croppable", |m| m.width() >= 2 && m.height() >= 2),
        seed in any::<u64>(),
        k in 1usize..8,
    ) {
        let image = textured(mask.width(), mask.height(), 1);
        let params = SelectionParams { k, sampler: CropSampler::SELECTION, s_patch: 8 };
        let ctx = ImageContext { image_id: "p/x.png", class_id: 0, ratio: 0.0, threshold: 1.0, mask: Some(&mask) };
        let picked: SelectedPatch<f64> =
            select_dynamic(&image, &ctx, &params, &MockScorer, &mut substream(seed, SELECT_DOMAIN, "p/x.png")).unwrap();
        prop_assert_eq!(picked.source, PatchSource::Cropped);
        let candidates = crop_candidates("p/x.png", &image, k, &params.sampler, 8, &mut substream(seed, SELECT_DOMAIN, "p/x.png")).unwrap();
        let scores: Vec<f64> = candidates.iter().map(|c| mock_score(c.rect, &mask).unwrap()).collect();
        prop_assert!(scores.iter().all(|&s| s <= picked.score));
        let first_best = scores.iter().position(|&s| s == picked.score).unwrap();
        prop_assert_eq!(candidates[first_best].rect, picked.rect);
        prop_assert_eq!(&candidates[first_best].pixels, &picked.pixels);
    }

    #[test]
    fn resize_branch_iff_at_or_above_threshold(
        mask in mask_strategy(12).prop_filter("croppable", |m| m.width() >= 2 && m.height() >= 2),
        threshold in 0.0f64..=1.0,
    ) {
        let image = textured(mask.width(), mask.height(), 2);
        let ratio = occupancy::<f64>(&mask).ratio;
        let params = SelectionParams { k: 3, sampler: CropSampler::SELECTION, s_patch: 6 };
        let ctx = ImageContext { image_id: "p/x.png", class_id: 0, ratio, threshold, mask: Some(&mask) };
        let picked = select_dynamic(&image, &ctx, &params, &MockScorer, &mut substream(0, SELECT_DOMAIN, "p/x.png")).unwrap();
        prop_assert_eq!(picked.source == PatchSource::Resized, ratio >= threshold);
        if ratio >= threshold {
            prop_assert_eq!(picked.pixels, image.resize(6));
        }
    }

    #[test]
    fn top_k_matches_full_sort(
        scores in proptest::collection::vec(0u8..6, 1..40),
        z in prop_oneof![Just(1usize), Just(4)],
        n_ipc in 1usize..5,
    ) {
        let patches: Vec<SelectedPatch<f64>> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| patch(&format!("c/{:02}.png", (i * 7) % 40), s as f64 / 5.0, 2))
            .collect();
        let plan = SynthesisPlan::new(z, n_ipc, 4).unwrap();
        match top_k(&patches, &plan, false) {
            Ok(ranked) => {
                let mut brute: Vec<(i64, String)> = patches
                    .iter()
                    .map(|p| (-((p.score * 5.0).round() as i64), p.image_id.clone()))
                    .collect();
                brute.sort();
                brute.truncate(plan.k_select());
                let got: Vec<(i64, String)> = ranked
                    .iter()
                    .map(|p| (-((p.score * 5.0).round() as i64), p.image_id.clone()))
                    .collect();
                prop_assert_eq!(got, brute);
                prop_assert!(ranked.windows(2).all(|w| w[0].score >= w[1].score));
            }
            Err(_) => prop_assert!(patches.len() < plan.k_select()),
        }
    }

    #[test]
    fn synth_maps_every_pixel_to_one_member(grid in 1u32..5, cell in 1u32..6) {
        let z = (grid * grid) as usize;
        let plan = SynthesisPlan::new(z, 1, grid * cell).unwrap();
        let members: Vec<SelectedPatch<f64>> = (0..z)
            .map(|j| {
                let mut p = patch(&format!("c/{j}.png"), 0.5, cell);
                p.pixels = Raster::from_fn(cell, cell, |x, y| [j as u8, x as u8, y as u8]);
                p
            })
            .collect();
        let group: Vec<&SelectedPatch<f64>> = members.iter().collect();
        let img = synth(&group, &plan, 0, 0).unwrap();
        let side = plan.distilled_side;
        for y in 0..side {
            for x in 0..side {
                let owners: Vec<usize> = (0..z)
                    .filter(|&j| {
                        let r = plan.cell_rect(j);
                        r.x <= x && x < r.x + r.w && r.y <= y && y < r.y + r.h
                    })
                    .collect();
                prop_assert_eq!(owners.len(), 1);
                let j = owners[0];
                let r = plan.cell_rect(j);
                prop_assert_eq!(img.pixels.pixel(x, y), [j as u8, (x - r.x) as u8, (y - r.y) as u8]);
            }
        }
    }

    #[test]
    fn soft_labels_are_distributions(
        dists in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 5), 1..8),
    ) {
        let dists: Vec<Vec<f64>> = dists.into_iter().map(normalize).collect();
        let image = distilled(4);
        let crops = crops_for(&image, dists.len());
        let label = soft_label(&Table(dists.clone()), &crops, &image, "c/distilled_0").unwrap();
        prop_assert!(label.probs.iter().all(|&p| p >= 0.0));
        prop_assert!((label.probs.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn soft_labels_follow_class_permutations(
        dists in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 5), 1..8),
        perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let dists: Vec<Vec<f64>> = dists.into_iter().map(normalize).collect();
        let permuted: Vec<Vec<f64>> = dists
            .iter()
            .map(|d| (0..5).map(|c| d[perm[c]]).collect())
            .collect();
        let image = distilled(4);
        let crops = crops_for(&image, dists.len());
        let a = soft_label(&Table(dists), &crops, &image, "x").unwrap();
        let b = soft_label(&Table(permuted), &crops, &image, "x").unwrap();
        for (c, &from) in perm.iter().enumerate() {
            prop_assert_eq!(b.probs[c].to_bits(), a.probs[from].to_bits());
        }
    }

    #[test]
    fn soft_labels_ignore_crop_order(
        dists in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 5), 1..8),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let dists: Vec<Vec<f64>> = dists.into_iter().map(normalize).collect();
        let mut order: Vec<usize> = (0..dists.len()).collect();
        order.shuffle(&mut substream(seed, "test", "order"));
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| dists[i].clone()).collect();
        let image = distilled(4);
        let crops = crops_for(&image, dists.len());
        let a = soft_label(&Table(dists), &crops, &image, "x").unwrap();
        let b = soft_label(&Table(shuffled), &crops, &image, "x").unwrap();
        for (x, y) in a.probs.iter().zip(&b.probs) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn histogram_is_a_distribution(rs in ratios(200), bins in 1usize..40) {
        let (edges, fractions) = histogram(&rs, bins).unwrap();
        prop_assert_eq!(edges.len(), bins + 1);
        prop_assert!(fractions.iter().all(|&f| f >= 0.0));
        prop_assert!((fractions.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn resize_branch_retains_at_least_crop_branch(
        (mask, rect) in mask_strategy(16).prop_flat_map(|m| {
            let (w, h) = (m.width(), m.height());
            (Just(m), rect_in(w, h))
        })
    ) {
        let full: f64 = retention(CropRect::full(mask.width(), mask.height()), &mask).unwrap();
        let crop: f64 = retention(rect, &mask).unwrap();
        prop_assert_eq!(full, 1.0);
        prop_assert!(crop <= full);
    }
}

fn patch(id: &str, score: f64, side: u32) -> SelectedPatch<f64> {
    SelectedPatch {
        image_id: id.to_string(),
        class_id: 0,
        source: PatchSource::Cropped,
        rect: CropRect::new(0, 0, side, side),
        score,
        pixels: Raster::filled(side, side, [(score * 255.0) as u8; 3]),
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn distilled(cell: u32) -> DistilledImage {
    let plan = SynthesisPlan::new(4, 1, 2 * cell).unwrap();
    let members: Vec<SelectedPatch<f64>> = (0..4)
        .map(|j| patch(&format!("c/{j}.png"), 0.2 * j as f64, cell))
        .collect();
    let group: Vec<&SelectedPatch<f64>> = members.iter().collect();
    synth(&group, &plan, 1, 0).unwrap()
}

fn crops_for(image: &DistilledImage, m: usize) -> Vec<patchstill::softlabel::LabelCrop> {
    let mut crops = label_crops(
        &image.pixels,
        m,
        &CropSampler::LABEL,
        4,
        &mut substream(0, "test", "crops"),
    )
    .unwrap();
    // tag each crop with its position so the table teacher can look it up
    for (i, c) in crops.iter_mut().enumerate() {
        c.pixels = Raster::filled(1, 1, [i as u8, 0, 0]);
    }
    crops
}

/// Emits row `i` of its table for the crop tagged `i`.
struct Table(Vec<Vec<f64>>);

impl Teacher<f64> for Table {
    fn class_count(&self) -> usize {
        self.0[0].len()
    }

    fn input_side(&self) -> u32 {
        1
    }

    fn predict(&self, input: &TeacherInput<'_, f64>) -> Result<Vec<f64>, ScoringError> {
        Ok(self.0[input.crop.pixels.pixel(0, 0)[0] as usize].clone())
    }
}

#[test]
fn mock_scorer_reads_rect_not_pixels() {
    let mask = Mask::from_fn("c/x.png", 4, 4, |x, _| x < 2);
    let input = ScoringInput {
        patch: &Raster::filled(2, 2, [0; 3]),
        rect: CropRect::new(0, 0, 2, 4),
        mask: Some(&mask),
        true_class: 0,
    };
    let s: f64 = MockScorer.score(&input).unwrap();
    assert_eq!(s, 1.0);
}
