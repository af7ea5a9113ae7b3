// temporary debug test
#[test]
fn dbg_disk_speckle() {
    use g3pd::image::SegmentationMask;
    use g3pd::segment::{block_morphology, MorphologyConfig};
    use g3pd::bench::segmentation_error;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let (h, w) = (180, 180);
    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let mut truth = SegmentationMask::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
            if d <= 60.0 { truth.set(r, c, 1); }
        }
    }
    let mut rng = StdRng::seed_from_u64(7);
    let mut noisy = SegmentationMask::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let p = if truth.get(r, c) == 1 { 0.55 } else { 0.01 };
            if rng.gen_bool(p) { noisy.set(r, c, 1); }
        }
    }
    let out = block_morphology(&noisy, &MorphologyConfig::default()).unwrap();
    let (err, mf, mb) = segmentation_error(&out, &truth).unwrap();
    eprintln!("err={err:.4} mf={mf} mb={mb} fg_out={} fg_truth={}", out.count_foreground(), truth.count_foreground());
    // block level dump
    let s = 9;
    for br in 0..h/s {
        let mut line = String::new();
        for bc in 0..w/s {
            let o = out.get(br*s+4, bc*s+4);
            let t = truth.get(br*s+4, bc*s+4);
            line.push(match (o, t) { (1,1) => '#', (0,0) => '.', (1,0) => '+', (0,1) => '-', _ => '?' });
        }
        eprintln!("{line}");
    }
    panic!("debug");
}
