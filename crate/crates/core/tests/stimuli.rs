use dynlens_core::geometry::DisplayGeometry;
use dynlens_core::stimuli::{render_diamond_frame, render_rds, DiamondStimulusParams, GrayImage, RdsParams};
use proptest::prelude::*;

/// Darkness-weighted x centroid (px from the image center) in a box.
fn centroid_x(img: &GrayImage, cx: f64, cy: f64, half: f64) -> f64 {
    let (ox, oy) = (img.width as f64 / 2.0, img.height as f64 / 2.0);
    let (x0, x1) = ((ox + cx - half).floor() as u32, (ox + cx + half).ceil() as u32);
    let (y0, y1) = ((oy + cy - half).floor() as u32, (oy + cy + half).ceil() as u32);
    let (mut sw, mut sx) = (0.0, 0.0);
    for y in y0..y1 {
        for x in x0..x1 {
            let w = 255.0 - img.get(x, y) as f64;
            sw += w;
            sx += w * (x as f64 + 0.5 - ox);
        }
    }
    sx / sw
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn circle_shift_matches_metadata(disp in 0.0f64..4.0, t in 0.0f64..0.45, seed in 0u64..50, target in 0usize..4) {
        let g = DisplayGeometry::dynamic_lens_rig();
        let p = DiamondStimulusParams {
            target_disparity_arcmin: disp,
            target_index: target,
            jitter_seed: seed,
            ..Default::default()
        };
        let pair = render_diamond_frame(&p, &g, t).unwrap();
        let sub = pair.meta.pixel_subtense_arcmin;
        let r = p.circle_radius_arcmin / sub;
        for e in pair.meta.elements.iter().skip(1) {
            prop_assert!(e.visible);
            let shift = centroid_x(&pair.left, e.x_px + e.disparity_arcmin / sub / 2.0, e.y_px, r + 4.0)
                - centroid_x(&pair.right, e.x_px - e.disparity_arcmin / sub / 2.0, e.y_px, r + 4.0);
            prop_assert!((shift - e.disparity_arcmin / sub).abs() <= 0.5, "{}: {shift} px vs {}", e.label, e.disparity_arcmin / sub);
        }
        prop_assert_eq!(&render_diamond_frame(&p, &g, t).unwrap(), &pair);
    }

    #[test]
    fn rds_is_deterministic(seed in any::<u64>()) {
        let g = DisplayGeometry::dynamic_lens_rig();
        let p = RdsParams { seed, ..Default::default() };
        prop_assert_eq!(render_rds(&p, &g).unwrap(), render_rds(&p, &g).unwrap());
    }
}
