use attkws::layers::probes::{ConvProbe, DenseProbe, GruProbe, LstmProbe, Probe, XentProbe};
use attkws::layers::{softmax_xent, Conv2d, ConvSpec, Dense, GruCell, LstmCell};
use attkws::numerics::{grad_check, Rng, Tensor, DEFAULT_EPS};
use proptest::prelude::*;

fn check_probe(p: &dyn Probe, probes: usize, tol: f64, seed: u64) {
    let mut rng = Rng::new(seed);
    for k in 0..probes {
        let inputs = p.sample_inputs(&mut rng);
        let rep = grad_check(p, &inputs, DEFAULT_EPS).unwrap();
        assert!(rep.max_rel_error < tol, "{} probe {k}: {:?}", p.name(), rep);
    }
}

#[test]
fn dense_examples() {
    let mut w = Tensor::<f32>::zeros(&[3, 3]);
    for i in 0..3 {
        w.data_mut()[i * 3 + i] = 1.0;
    }
    let fc = Dense {
        w,
        b: Tensor::zeros(&[3]),
    };
    assert_eq!(fc.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);

    let mut rng = Rng::new(1);
    let fc: Dense<f64> = Dense::new(5, 4, &mut rng).unwrap();
    let mut fc = fc;
    fc.b = Tensor::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    assert_eq!(fc.forward(&[0.0; 5]).unwrap(), vec![0.1, 0.2, 0.3, 0.4]);

    // Triple-loop style oracle.
    let x: Vec<f64> = (0..5).map(|i| i as f64 * 0.3 - 0.7).collect();
    let y = fc.forward(&x).unwrap();
    for j in 0..4 {
        let mut acc = fc.b.data()[j];
        for i in 0..5 {
            acc += fc.w.data()[i * 4 + j] * x[i];
        }
        assert!((acc - y[j]).abs() < 1e-12);
    }
    assert!(fc.forward(&[0.0; 4]).is_err());
}

#[test]
fn lstm_zero_params() {
    let cell = LstmCell::<f64>::zeros(3, 4);
    let (h, c, _) = cell.step(&[0.5, -1.0, 2.0], &[0.3; 4], &[0.0; 4]).unwrap();
    assert!(h.iter().chain(&c).all(|&v| v == 0.0));

    let c0 = [1.0, -2.0, 0.5, 4.0];
    let (h, c, _) = cell.step(&[0.1, 0.2, 0.3], &[0.0; 4], &c0).unwrap();
    for k in 0..4 {
        assert!((c[k] - 0.5 * c0[k]).abs() < 1e-15);
        assert!((h[k] - 0.5 * (0.5 * c0[k]).tanh()).abs() < 1e-15);
    }
    assert!(cell.step(&[0.0; 2], &[0.0; 4], &[0.0; 4]).is_err());
    assert!(cell.step(&[0.0; 3], &[0.0; 4], &[0.0; 3]).is_err());
}

#[test]
fn gru_zero_params() {
    let cell = GruCell::<f64>::zeros(3, 4);
    let h0 = [1.0, -2.0, 0.5, 4.0];
    let (h, _) = cell.step(&[0.7, 0.1, -0.3], &h0).unwrap();
    for k in 0..4 {
        assert!((h[k] - 0.5 * h0[k]).abs() < 1e-15);
    }
    let (h, _) = cell.step(&[0.7, 0.1, -0.3], &[0.0; 4]).unwrap();
    assert!(h.iter().all(|&v| v == 0.0));
    assert!(cell.step(&[0.0; 3], &[0.0; 5]).is_err());
}

#[test]
fn cell_output_width_is_hidden_width() {
    let mut rng = Rng::new(3);
    for input in [1, 7, 40, 320] {
        let g: GruCell<f32> = GruCell::new(input, 9, &mut rng).unwrap();
        let l: LstmCell<f32> = LstmCell::new(input, 9, &mut rng).unwrap();
        let x = vec![0.1; input];
        assert_eq!(g.step(&x, &[0.0; 9]).unwrap().0.len(), 9);
        assert_eq!(l.step(&x, &[0.0; 9], &[0.0; 9]).unwrap().0.len(), 9);
    }
}

#[test]
fn param_count_formulas() {
    assert_eq!(GruCell::<f32>::param_count(40, 64), 3 * (64 * 104 + 64));
    assert_eq!(LstmCell::<f32>::param_count(40, 64), 4 * (64 * 104 + 64));
    assert_eq!(ConvSpec::paper(16).param_count(), 1616);
    assert_eq!(ConvSpec::paper(8).param_count(), 808);
    let mut rng = Rng::new(0);
    let g: GruCell<f32> = GruCell::new(40, 64, &mut rng).unwrap();
    assert_eq!(
        g.w_gates.len() + g.b_gates.len() + g.w_cand.len() + g.b_cand.len(),
        20160
    );
}

#[test]
fn conv_geometry() {
    let s = ConvSpec::paper(16);
    assert_eq!(s.out_bins(40), 20);
    assert_eq!(s.out_width(40), 320);
    assert_eq!(s.pad_low(40), 1);
    assert!(ConvSpec { freq_kernel: 41, ..s }.validate(40).is_err());
}

#[test]
fn conv_identity_kernel_is_strided_slice() {
    let spec = ConvSpec::paper(1);
    let mut conv = Conv2d::<f64>::zeros(spec, 40);
    // Current frame, centre frequency tap.
    let idx = ((spec.time_kernel - 1) * spec.freq_kernel + 2) * 1 * 1;
    conv.kernel.data_mut()[idx] = 1.0;
    let mut rng = Rng::new(4);
    let x = Tensor::from_vec(&[6, 40], (0..240).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let y = conv.forward(&x).unwrap();
    assert_eq!(y.shape(), &[6, 20]);
    for t in 0..6 {
        let want: Vec<f64> = (0..20).map(|f| x.row(t)[2 * f + 1]).collect();
        assert_eq!(y.row(t), &want[..]);
    }
}

#[test]
fn conv_zero_input_broadcasts_bias() {
    let spec = ConvSpec::paper(3);
    let mut rng = Rng::new(5);
    let mut conv: Conv2d<f32> = Conv2d::new(spec, 40, &mut rng).unwrap();
    conv.bias = Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap();
    let y = conv.forward(&Tensor::zeros(&[4, 40])).unwrap();
    for t in 0..4 {
        for f in 0..20 {
            assert_eq!(&y.row(t)[f * 3..f * 3 + 3], &[0.5, -1.0, 2.0]);
        }
    }
}

#[test]
fn conv_is_causal() {
    let spec = ConvSpec::paper(2);
    let mut rng = Rng::new(6);
    let conv: Conv2d<f64> = Conv2d::new(spec, 40, &mut rng).unwrap();
    let x = Tensor::from_vec(&[30, 40], (0..1200).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
    let y = conv.forward(&x).unwrap();
    let mut x2 = x.clone();
    for t in 15..30 {
        x2.row_mut(t).iter_mut().for_each(|v| *v += 3.0);
    }
    let y2 = conv.forward(&x2).unwrap();
    for t in 0..15 {
        assert_eq!(y.row(t), y2.row(t));
    }
    assert_ne!(y.row(15), y2.row(15));
}

#[test]
fn xent_examples() {
    let (l, _) = softmax_xent(&[1.5f64, 1.5], 1).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    let (l, _) = softmax_xent(&[20.0f64, -20.0], 0).unwrap();
    assert!(l.abs() < 1e-12);
}

#[test]
fn grad_check_dense() {
    let mut rng = Rng::new(10);
    check_probe(&DenseProbe::new(7, 5, &mut rng), 5, 1e-6, 11);
}

#[test]
fn grad_check_lstm_cell() {
    let mut rng = Rng::new(12);
    check_probe(&LstmProbe::new(6, 5, &mut rng), 5, 1e-4, 13);
}

#[test]
fn grad_check_gru_cell() {
    let mut rng = Rng::new(14);
    check_probe(&GruProbe::new(6, 5, &mut rng), 5, 1e-4, 15);
}

#[test]
fn grad_check_conv2d() {
    let mut rng = Rng::new(16);
    let spec = ConvSpec {
        time_kernel: 4,
        freq_kernel: 5,
        freq_stride: 2,
        in_channels: 1,
        out_channels: 3,
    };
    check_probe(&ConvProbe::new(spec, 12, 6, &mut rng), 5, 1e-4, 17);
}

#[test]
fn grad_check_xent() {
    check_probe(&XentProbe::new(5, 2), 5, 1e-6, 18);
    check_probe(&XentProbe::new(2, 0), 5, 1e-6, 19);
}

proptest! {
    #[test]
    fn gru_is_convex_combination(seed in 0u64..1000) {
        let mut rng = Rng::new(seed);
        let cell: GruCell<f64> = GruCell::new(4, 6, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let h: Vec<f64> = (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (h_new, tr) = cell.step(&x, &h).unwrap();
        let cand = tr.candidate();
        for k in 0..6 {
            let (lo, hi) = (h[k].min(cand[k]), h[k].max(cand[k]));
            prop_assert!(h_new[k] >= lo - 1e-12 && h_new[k] <= hi + 1e-12);
        }
    }
}
