use avim::neuron::*;
use avim::Error;

const DT: f64 = DEFAULT_DT;

fn pyramidal_spike_times(p: &NeuronParams, dt: f64, i_soma: f64, ms: f64) -> Vec<f64> {
    let mut s = PyramidalState::resting(&p.pyramidal);
    let mut times = Vec::new();
    for k in 0..(ms / dt).round() as usize {
        let next = step_pyramidal(&s, p, dt, i_soma, 0.0).unwrap();
        assert!(next.gating().iter().all(|g| (0.0..=1.0).contains(g)));
        if detect_spike(s.v_soma, next.v_soma, SPIKE_THRESHOLD) {
            times.push((k + 1) as f64 * dt);
        }
        s = next;
    }
    times
}

fn interneuron_spike_times(p: &NeuronParams, dt: f64, i_syn: f64, ms: f64) -> Vec<f64> {
    let mut s = InterneuronState::resting(&p.interneuron);
    let mut times = Vec::new();
    for k in 0..(ms / dt).round() as usize {
        let next = step_interneuron(&s, p, dt, i_syn).unwrap();
        assert!(next.gating().iter().all(|g| (0.0..=1.0).contains(g)));
        if detect_spike(s.v, next.v, SPIKE_THRESHOLD) {
            times.push((k + 1) as f64 * dt);
        }
        s = next;
    }
    times
}

fn min_isi(times: &[f64]) -> f64 {
    times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[test]
fn rest_is_stable_without_input() {
    let p = NeuronParams::default();
    let mut s = PyramidalState::resting(&p.pyramidal);
    let (vs0, vd0) = (s.v_soma, s.v_dend);
    let mut i = InterneuronState::resting(&p.interneuron);
    let vi0 = i.v;
    for _ in 0..(1000.0 / DT) as usize {
        s = step_pyramidal(&s, &p, DT, 0.0, 0.0).unwrap();
        i = step_interneuron(&i, &p, DT, 0.0).unwrap();
        assert!((s.v_soma - vs0).abs() < 0.5 && (s.v_dend - vd0).abs() < 0.5);
        assert!((i.v - vi0).abs() < 0.5);
    }
}

#[test]
fn firing_rate_grows_with_current() {
    let p = NeuronParams::default();
    let currents: Vec<f64> = (0..10).map(|k| 0.5 * k as f64).collect();
    let pyr: Vec<usize> = currents.iter().map(|&i| pyramidal_spike_times(&p, DT, i, 1000.0).len()).collect();
    let inb: Vec<usize> = currents.iter().map(|&i| interneuron_spike_times(&p, DT, i, 1000.0).len()).collect();
    assert!(pyr.windows(2).all(|w| w[0] <= w[1]), "{pyr:?}");
    assert!(inb.windows(2).all(|w| w[0] <= w[1]), "{inb:?}");
    assert_eq!(pyr[0], 0);
    assert!(*pyr.last().unwrap() > 0);
}

#[test]
fn interneuron_fires_faster_than_pyramidal_cell() {
    let p = NeuronParams::default();
    let pyr = pyramidal_spike_times(&p, DT, 2.0, 1000.0).len();
    let inb = interneuron_spike_times(&p, DT, 2.0, 1000.0).len();
    assert!(inb > pyr, "interneuron {inb} vs pyramidal {pyr}");
}

#[test]
fn refractory_period_exceeds_two_ms() {
    let p = NeuronParams::default();
    for i in [1.0, 5.0, 20.0, 50.0] {
        let t = pyramidal_spike_times(&p, DT, i, 500.0);
        assert!(t.len() > 2 && min_isi(&t) > 2.0, "pyramidal at {i}: {}", min_isi(&t));
    }
    // Beyond about 25 µA/cm² the interneuron enters depolarization block, so
    // its drives stay within the tonic range.
    for i in [1.0, 5.0, 20.0] {
        let t = interneuron_spike_times(&p, DT, i, 500.0);
        assert!(t.len() > 2 && min_isi(&t) > 2.0, "interneuron at {i}: {}", min_isi(&t));
    }
}

#[test]
fn halving_dt_changes_counts_by_at_most_one() {
    let p = NeuronParams::default();
    for i in [0.5, 1.0, 3.0, 10.0] {
        let a = pyramidal_spike_times(&p, DT, i, 1000.0).len();
        let b = pyramidal_spike_times(&p, DT / 2.0, i, 1000.0).len();
        assert!(a > 0 && a.abs_diff(b) <= 1, "pyramidal at {i}: {a} vs {b}");
        let a = interneuron_spike_times(&p, DT, i, 1000.0).len();
        let b = interneuron_spike_times(&p, DT / 2.0, i, 1000.0).len();
        assert!(a > 0 && a.abs_diff(b) <= 1, "interneuron at {i}: {a} vs {b}");
    }
}

#[test]
fn dendritic_drive_reaches_the_soma() {
    let p = NeuronParams::default();
    let mut s = PyramidalState::resting(&p.pyramidal);
    let v0 = s.v_soma;
    for _ in 0..(200.0 / DT) as usize {
        s = step_pyramidal(&s, &p, DT, 0.0, 0.5).unwrap();
    }
    assert!(s.v_dend > s.v_soma && s.v_soma > v0);
}

#[test]
fn tabulated_kinetics_track_direct_evaluation() {
    let p = NeuronParams::default();
    let table = KineticsTable::new(&p, DT);
    assert_eq!(table.dt(), DT);

    // One step from states spread over the whole voltage range.
    for k in 0..400 {
        let v = -120.0 + 0.5 * k as f64 + 0.013;
        let mut a = PyramidalState::resting(&p.pyramidal);
        a.v_soma = v;
        a.v_dend = v + 3.0;
        let mut b = a;
        a.advance(&p.pyramidal, DT, 0.1, 0.2);
        b.advance_tabulated(&p.pyramidal, &table, 0.1, 0.2);
        for (x, y) in a.gating().iter().zip(b.gating()) {
            assert!((x - y).abs() < 1e-4, "gate at {v}: {x} vs {y}");
        }
        assert!((a.v_soma - b.v_soma).abs() < 1e-3 && (a.v_dend - b.v_dend).abs() < 1e-3);
    }

    // Far outside the table both paths are identical.
    let mut a = InterneuronState::resting(&p.interneuron);
    a.v = -200.0;
    let mut b = a;
    a.advance(&p.interneuron, DT, 0.0);
    b.advance_tabulated(&p.interneuron, &table, 0.0);
    assert_eq!(a, b);

    // Same spike train over a driven second.
    let mut a = PyramidalState::resting(&p.pyramidal);
    let mut b = a;
    let (mut na, mut nb) = (0, 0);
    for _ in 0..(1000.0 / DT) as usize {
        let (va, vb) = (a.v_soma, b.v_soma);
        a.advance(&p.pyramidal, DT, 2.0, 0.0);
        b.advance_tabulated(&p.pyramidal, &table, 2.0, 0.0);
        na += detect_spike(va, a.v_soma, 0.0) as usize;
        nb += detect_spike(vb, b.v_soma, 0.0) as usize;
    }
    assert!(na > 0 && na.abs_diff(nb) <= 1, "{na} vs {nb}");
}

#[test]
fn spike_detection_examples() {
    assert!(!detect_spike(-60.0, -55.0, 0.0));
    assert!(detect_spike(-10.0, 15.0, 0.0));
    assert!(!detect_spike(10.0, 20.0, 0.0));
}

#[test]
fn invalid_inputs_are_rejected() {
    let p = NeuronParams::default();
    let s = PyramidalState::resting(&p.pyramidal);
    assert!(matches!(step_pyramidal(&s, &p, 0.0, 0.0, 0.0), Err(Error::Config(_))));
    assert!(matches!(step_pyramidal(&s, &p, 0.2, 0.0, 0.0), Err(Error::Config(_))));
    assert!(matches!(step_pyramidal(&s, &p, DT, f64::NAN, 0.0), Err(Error::NonFinite { .. })));
    let mut bad = s;
    bad.v_dend = f64::INFINITY;
    assert!(matches!(step_pyramidal(&bad, &p, DT, 0.0, 0.0), Err(Error::NonFinite { .. })));
    let i = InterneuronState::resting(&p.interneuron);
    assert!(matches!(step_interneuron(&i, &p, DT, f64::INFINITY), Err(Error::NonFinite { .. })));

    let mut q = NeuronParams::default();
    q.pyramidal.c_m = 0.0;
    assert!(q.validate().is_err());
    let mut q = NeuronParams::default();
    q.interneuron.g_k = -1.0;
    assert!(q.validate().is_err());
    NeuronParams::default().validate().unwrap();
}

#[test]
fn default_constants() {
    let p = NeuronParams::default();
    assert_eq!((p.pyramidal.c_m, p.pyramidal.g_ds, p.pyramidal.g_sd), (3.4, 0.11, 0.33));
    assert_eq!(p.interneuron.c_m, 1.0);
}
