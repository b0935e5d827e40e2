use motion_prior::camera::CameraIntrinsics;
use motion_prior::gradcore::{ParamStore, Tape};
use motion_prior::harness::losses::{discriminator_loss, generator_loss, sixd_sequence, ClipTargets, LossTerms};
use motion_prior::harness::train::{evaluate, observation_oracle, train, Model, Trainer};
use motion_prior::harness::{LossWeights, TrainConfig, Variant};
use motion_prior::metrics::JointTrajectory;
use motion_prior::models::discriminator::pose_inputs;
use motion_prior::skeleton::default_tree;
use motion_prior::synthmotion::{make_dataset, Dataset};
use motion_prior::Error;

fn small_cfg(variant: Variant) -> TrainConfig {
    TrainConfig { clips: 10, real_pool: 8, iterations: 6, variant, ..TrainConfig::default() }
}

fn data(cfg: &TrainConfig) -> Dataset {
    make_dataset(&cfg.dataset()).unwrap()
}

fn zero_blocks(store: &mut ParamStore, prefix: &str) {
    for id in store.ids_with_prefix(prefix) {
        store.get_mut(id).values.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[test]
fn total_is_sum_of_weighted_terms() {
    let cfg = small_cfg(Variant::SepTReg);
    let d = data(&cfg);
    let model = Model::new(&cfg);
    let targets: Vec<ClipTargets> = d.train[..2].iter().map(ClipTargets::from_clip).collect();
    let mut tape = Tape::new();
    let outs: Vec<_> =
        d.train[..2].iter().map(|c| model.generator.forward(&mut tape, &model.store, &c.observations).unwrap()).collect();
    let batch: Vec<_> = outs.iter().zip(&targets).collect();
    let (total, b) = generator_loss(
        &mut tape,
        &model.store,
        &default_tree(),
        &cfg.intrinsics,
        &batch,
        &model.discriminator,
        &cfg.weights,
        true,
    )
    .unwrap();
    let w = cfg.weights;
    let lambdas = [w.w_3d, w.w_2d, w.w_smpl_pose, w.w_smpl_beta, w.w_adv, w.w_reg];
    let sum: f64 = b.weighted.values().iter().sum();
    assert!((tape.scalar(total) - sum).abs() < 1e-12);
    for (k, name) in LossTerms::NAMES.iter().enumerate() {
        let expect = lambdas[k] * b.unweighted.values()[k];
        assert!((b.weighted.values()[k] - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{name}");
    }
}

#[test]
fn regularizer_stays_off_graph_without_weight() {
    let cfg = small_cfg(Variant::SepTReg);
    let d = data(&cfg);
    let model = Model::new(&cfg);
    let target = ClipTargets::from_clip(&d.train[0]);
    let w0 = LossWeights { w_reg: 0.0, ..cfg.weights };
    let run = |w: &LossWeights| {
        let mut tape = Tape::new();
        let v = model.generator.forward(&mut tape, &model.store, &d.train[0].observations).unwrap();
        let (_, b) = generator_loss(
            &mut tape,
            &model.store,
            &default_tree(),
            &cfg.intrinsics,
            &[(&v, &target)],
            &model.discriminator,
            w,
            true,
        )
        .unwrap();
        b
    };
    let on = run(&cfg.weights);
    let off = run(&w0);
    assert_eq!(off.weighted.reg, 0.0);
    // same value, computed off the tape
    assert!((off.unweighted.reg - on.unweighted.reg).abs() <= 1e-12 * on.unweighted.reg);
    assert!(on.unweighted.reg > 0.0);
}

#[test]
fn adversarial_term_is_lambda_when_discriminator_outputs_zero() {
    let cfg = small_cfg(Variant::SepT);
    let d = data(&cfg);
    let mut model = Model::new(&cfg);
    zero_blocks(&mut model.store, "disc.output");
    let target = ClipTargets::from_clip(&d.train[0]);
    let mut tape = Tape::new();
    let v = model.generator.forward(&mut tape, &model.store, &d.train[0].observations).unwrap();
    let (_, b) = generator_loss(
        &mut tape,
        &model.store,
        &default_tree(),
        &cfg.intrinsics,
        &[(&v, &target)],
        &model.discriminator,
        &cfg.weights,
        false,
    )
    .unwrap();
    assert_eq!(b.unweighted.adv, 1.0);
    assert_eq!(b.weighted.adv, cfg.weights.w_adv);
}

#[test]
fn discriminator_loss_at_constant_half() {
    let cfg = small_cfg(Variant::SepT);
    let d = data(&cfg);
    let mut model = Model::new(&cfg);
    zero_blocks(&mut model.store, "disc.output");
    let out_b = model.store.id_of("disc.output.b").unwrap();
    model.store.get_mut(out_b).values[0] = 0.5;
    let real = sixd_sequence(&d.real_pool[0].frames);
    let fake = sixd_sequence(&d.real_pool[1].frames);
    for literal in [false, true] {
        let mut tape = Tape::new();
        let r = pose_inputs(&mut tape, &real);
        let f = pose_inputs(&mut tape, &fake);
        let loss = discriminator_loss(&mut tape, &model.store, &model.discriminator, &[r], &[f], literal).unwrap();
        assert!((tape.scalar(loss) - 0.5).abs() < 1e-15);
    }
}

#[test]
fn loss_assignments_agree_on_identical_inputs() {
    let cfg = small_cfg(Variant::SepT);
    let d = data(&cfg);
    let model = Model::new(&cfg);
    let real = sixd_sequence(&d.real_pool[0].frames);
    let mut tape = Tape::new();
    let r = pose_inputs(&mut tape, &real);
    let std = discriminator_loss(&mut tape, &model.store, &model.discriminator, &[r.clone()], &[r.clone()], false).unwrap();
    let lit = discriminator_loss(&mut tape, &model.store, &model.discriminator, &[r.clone()], &[r], true).unwrap();
    assert!((tape.scalar(std) - tape.scalar(lit)).abs() < 1e-15);
}

#[test]
fn zero_iterations_keep_initial_parameters() {
    let cfg = TrainConfig { iterations: 0, ..small_cfg(Variant::SepTReg) };
    let d = data(&cfg);
    let out = train(&cfg, &d).unwrap();
    let init = Model::new(&cfg);
    let ids: Vec<_> = init.store.ids().collect();
    assert_eq!(out.model.store.checksum(&ids), init.store.checksum(&ids));
    assert!(out.curves.is_empty());
}

#[test]
fn discriminator_moves_only_on_its_iterations() {
    let cfg = small_cfg(Variant::SepT);
    let d = data(&cfg);
    let mut trainer = Trainer::new(&cfg, &d).unwrap();
    let disc = trainer.model.discriminator_params();
    let gen = trainer.model.generator_params();
    for k in 1..=11 {
        let (d0, g0) = (trainer.model.store.checksum(&disc), trainer.model.store.checksum(&gen));
        let log = trainer.step().unwrap();
        assert_eq!(log.iteration, k);
        let (d1, g1) = (trainer.model.store.checksum(&disc), trainer.model.store.checksum(&gen));
        assert_eq!(d0 != d1, k % 5 == 0, "iteration {k}");
        assert_eq!(log.discriminator.is_some(), k % 5 == 0);
        assert_ne!(g0, g1);
    }
}

#[test]
fn zero_reg_weight_reproduces_sep_t() {
    let a = small_cfg(Variant::SepT);
    let mut b = small_cfg(Variant::SepTReg);
    b.weights.w_reg = 0.0;
    let d = data(&a);
    let (ra, rb) = (train(&a, &d).unwrap(), train(&b, &d).unwrap());
    let ids: Vec<_> = ra.model.store.ids().collect();
    assert_eq!(ra.model.store.checksum(&ids), rb.model.store.checksum(&ids));
    for (x, y) in ra.model.store.blocks().iter().zip(rb.model.store.blocks()) {
        assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn non_finite_pose_reports_the_loss_term() {
    let cfg = small_cfg(Variant::SepT);
    let d = data(&cfg);
    let mut trainer = Trainer::new(&cfg, &d).unwrap();
    for id in trainer.model.store.ids_with_prefix("gen.j05.head") {
        trainer.model.store.get_mut(id).values.fill(f64::NAN);
    }
    match trainer.step() {
        Err(Error::NonFiniteLoss { iteration, term }) => {
            assert_eq!(iteration, 1);
            assert!(LossTerms::NAMES.contains(&term.as_str()), "{term}");
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("a NaN pose head should not train"),
    }
}

#[test]
fn metrics_vanish_on_ground_truth() {
    let cfg = small_cfg(Variant::SepT);
    let d = data(&cfg);
    for clip in &d.eval {
        let gt = JointTrajectory::from_meters(&clip.gt_keypoints_3d, 25.0).unwrap();
        let r = motion_prior::metrics::report(&gt, &gt).unwrap();
        assert_eq!((r.mpjpe, r.acc_err), (0.0, 0.0));
        assert!(r.pa_mpjpe < 1e-9);
        // the oracle sees only noisy pixels, so it is close but not exact
        let oracle = JointTrajectory::from_meters(&observation_oracle(clip), 25.0).unwrap();
        let e = motion_prior::metrics::mpjpe(&oracle, &gt).unwrap();
        assert!(e > 0.0 && e < 200.0, "oracle mpjpe {e}");
    }
}

#[test]
fn evaluation_is_deterministic_and_finite() {
    let cfg = small_cfg(Variant::SepTReg);
    let d = data(&cfg);
    let model = Model::new(&cfg);
    let a = evaluate(&model, &d.eval).unwrap();
    let b = evaluate(&model, &d.eval).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.clips, d.eval.len());
    assert!(a.metrics.mpjpe.is_finite() && a.metrics.pa_mpjpe <= a.metrics.mpjpe);
}

#[test]
fn config_parsing() {
    let cfg = TrainConfig::parse("# comment\nvariant = sep_t\nlambda_reg = 0\niterations = 12\nfocal = 4000\n").unwrap();
    assert_eq!(cfg.variant, Variant::SepT);
    assert_eq!(cfg.weights.w_reg, 0.0);
    assert_eq!(cfg.iterations, 12);
    assert_eq!(cfg.intrinsics, CameraIntrinsics::new(4000.0, 224.0).unwrap());
    assert!(TrainConfig::parse("nonsense = 1").is_err());
    assert!(TrainConfig::parse("window = 16\nwindow = 8").is_err());
    assert!(TrainConfig::parse("window = 0").is_err());
    assert!(TrainConfig::parse("variant = temporal").is_err());
    let reparsed = TrainConfig::parse(&cfg.to_canonical_string()).unwrap();
    assert_eq!(reparsed.to_canonical_string(), cfg.to_canonical_string());
    assert_eq!(reparsed.hash(), cfg.hash());
    assert_ne!(cfg.hash(), TrainConfig::default().hash());
}
