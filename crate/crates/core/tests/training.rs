use gxnor::data::{batches, synthetic_blobs, BlobsSpec};
use gxnor::net::{svm_hinge_loss, LayerSpec, ModelHyper, Optimizer};
use gxnor::{Dataset, DiscreteSpace, Model, SurrogateSpec};

fn hyper(lr: f64) -> ModelHyper {
    ModelHyper { m: 3.0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
}

fn blobs(n: usize, classes: usize, dim: usize, seed: u64) -> Dataset {
    synthetic_blobs(&BlobsSpec::new(n, classes, dim, seed)).unwrap()
}

fn mlp(dim: usize, classes: usize) -> Model {
    Model::mlp(
        dim,
        &[32],
        classes,
        DiscreteSpace::ternary(),
        DiscreteSpace::ternary(),
        SurrogateSpec::rectangular(0.5, 0.5),
        (1e-5, 0.1),
    )
    .unwrap()
}

#[test]
fn linear_svm_separates_blobs() {
    let data = blobs(200, 2, 2, 3);
    // one grid-weight layer, batch norm for the scale, then the SVM head
    let specs = vec![
        LayerSpec::Dense { inputs: 2, outputs: 2, weights: DiscreteSpace::new(4, 1.0).unwrap() },
        LayerSpec::BatchNorm { features: 2, eps: 1e-5, momentum: 0.1 },
        LayerSpec::SvmHead { classes: 2 },
    ];
    let mut model = Model::new(specs, &[2]).unwrap();
    model.init_weights(1);
    let mut opt = Optimizer::new(&model, hyper(0.01), 1);
    let mut best = 0.0f64;
    for epoch in 0..50 {
        for batch in batches(&data, 20, epoch).unwrap() {
            model.train_step(&batch, &mut opt).unwrap();
        }
        best = best.max(model.evaluate(&data).unwrap().accuracy);
        if best == 1.0 {
            break;
        }
    }
    assert_eq!(best, 1.0);
}

#[test]
fn weights_stay_on_grid_every_step() {
    let data = blobs(300, 4, 8, 1);
    for n1 in [0, 1, 2, 6] {
        let mut model = Model::mlp(
            8,
            &[16],
            4,
            DiscreteSpace::new(n1, 1.0).unwrap(),
            DiscreteSpace::ternary(),
            SurrogateSpec::rectangular(0.5, 0.5),
            (1e-5, 0.1),
        )
        .unwrap();
        model.init_weights(2);
        let mut opt = Optimizer::new(&model, hyper(0.05), 2);
        for batch in batches(&data, 25, 0).unwrap() {
            model.train_step(&batch, &mut opt).unwrap();
            assert!(model.weights_on_grid(), "N1={n1}");
        }
    }
}

fn epoch_loss(model: &mut Model, data: &Dataset) -> f64 {
    let scores = model.forward(&data.images).unwrap();
    svm_hinge_loss(&scores, &data.labels).unwrap().loss
}

#[test]
fn loss_falls_over_first_epochs_for_most_seeds() {
    let mut improved = 0;
    for seed in 0..5 {
        let data = blobs(400, 4, 8, 10 + seed);
        let mut model = mlp(8, 4);
        model.init_weights(seed);
        let mut opt = Optimizer::new(&model, hyper(0.01), seed);
        let start = epoch_loss(&mut model, &data);
        for epoch in 0..5 {
            for batch in batches(&data, 50, epoch).unwrap() {
                model.train_step(&batch, &mut opt).unwrap();
            }
        }
        if epoch_loss(&mut model, &data) < start {
            improved += 1;
        }
    }
    assert!(improved >= 4, "loss fell for {improved}/5 seeds");
}

#[test]
fn evaluation_is_deterministic() {
    let data = blobs(100, 3, 4, 0);
    let mut model = mlp(4, 3);
    model.init_weights(0);
    let mut opt = Optimizer::new(&model, hyper(0.01), 0);
    for batch in batches(&data, 20, 0).unwrap() {
        model.train_step(&batch, &mut opt).unwrap();
    }
    assert_eq!(model.evaluate(&data).unwrap(), model.evaluate(&data).unwrap());
}

#[test]
fn ternary_preactivations_are_integers() {
    let data = blobs(64, 4, 8, 4);
    let mut model = mlp(8, 4);
    model.init_weights(3);
    // after the first quantizer, dense outputs are sums of products of {-1,0,1}
    let mut h = data.images.clone();
    let mut seen_quantized = false;
    for layer in model.layers() {
        h = layer.infer(&h, &mut Default::default()).unwrap();
        if let gxnor::net::Layer::QuantAct { .. } = layer {
            seen_quantized = true;
        }
        if seen_quantized && matches!(layer, gxnor::net::Layer::Dense { .. }) {
            assert!(h.data().iter().all(|v| v.fract() == 0.0));
        }
    }
    assert!(seen_quantized);
    let _ = &mut model;
}
