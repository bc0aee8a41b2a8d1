use proptest::prelude::*;
use wfcpl_core::{SampleSet, TimeWindow, Waveform};

fn window() -> impl Strategy<Value = TimeWindow> {
    (-5.0..5.0f64, 0.01..10.0f64).prop_map(|(t, dt)| TimeWindow::new(t, dt).unwrap())
}

/// Window, substeps `n`, degree `p <= min(n, 3)`, dofs `m`.
fn layout() -> impl Strategy<Value = (TimeWindow, usize, usize, usize)> {
    (window(), 1..=6usize, 1..=4usize)
        .prop_flat_map(|(w, n, m)| (Just(w), Just(n), 1..=n.min(3), Just(m)))
}

fn samples() -> impl Strategy<Value = (SampleSet, usize)> {
    layout().prop_flat_map(|(w, n, p, m)| {
        prop::collection::vec(prop::collection::vec(-100.0..100.0f64, m), n + 1).prop_map(
            move |values| (SampleSet::new(w, w.substep_times(n), values).unwrap(), p),
        )
    })
}

fn max_abs(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn interpolates_every_sample((s, p) in samples()) {
        let wf = Waveform::interpolate(&s, p).unwrap();
        let scale = max_abs(s.values());
        for (t, row) in s.times().iter().zip(s.values()) {
            let got = wf.eval(*t).unwrap();
            for (a, b) in got.iter().zip(row) {
                prop_assert!((a - b).abs() <= 1e-10 * scale, "t = {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn reproduces_polynomials_of_degree_p(
        (w, n, p, m) in layout(),
        coeffs in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 4), 4),
        probes in prop::collection::vec(0.0..=1.0f64, 5),
    ) {
        // One polynomial of degree <= p per dof, in the window-relative time s.
        let poly = |k: usize, t: f64| {
            let s = (t - w.start()) / w.len();
            coeffs[k][..=p].iter().rev().fold(0.0, |acc, c| acc * s + c)
        };
        let times = w.substep_times(n);
        let values = times.iter().map(|&t| (0..m).map(|k| poly(k, t)).collect()).collect();
        let wf = Waveform::interpolate(&SampleSet::new(w, times, values).unwrap(), p).unwrap();
        let scale: f64 = 1.0 + coeffs.iter().flatten().map(|c| c.abs()).sum::<f64>();
        for s in probes {
            let t = w.start() + s * w.len();
            let got = wf.eval(t).unwrap();
            for (k, v) in got.iter().enumerate() {
                prop_assert!((v - poly(k, t)).abs() <= 1e-10 * scale, "dof {k} at {t}");
            }
        }
    }

    #[test]
    fn constant_waveform_is_flat(w in window(), c in prop::collection::vec(-1e3..1e3f64, 1..5), s in 0.0..=1.0f64) {
        let wf = Waveform::constant(c.clone(), w);
        prop_assert_eq!(wf.eval(w.start() + s * w.len()).unwrap(), c);
    }

    #[test]
    fn evaluation_outside_window_is_rejected((s, p) in samples(), gap in 0.01..1.0f64) {
        let wf = Waveform::interpolate(&s, p).unwrap();
        let w = *s.window();
        prop_assert!(wf.eval(w.end() + gap * w.len()).is_err());
        prop_assert!(wf.eval(w.start() - gap * w.len()).is_err());
    }
}
