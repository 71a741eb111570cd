//! Full-batch node classifiers with hand-derived gradients.
//!
//! Three model kinds share one forward skeleton. A *branch* applies the
//! hidden layers (propagate, linear, ReLU, dropout) and ends with the final
//! propagation, so a single-branch model is exactly the standard stack:
//!
//! - `Mlp`:  logits = relu(X W1) W2            (no propagation)
//! - `Gcn`:  logits = A_hat relu(A_hat X W1) W2
//! - `Sgc`:  logits = (A_hat^hops X) W          (no hidden weights)
//!
//! Two-branch wirings feed two graphs through branch stacks and merge the
//! embeddings before one shared linear classifier: `SharedPair` reuses one
//! weight set and averages, `SeparatePair` keeps independent weights and
//! concatenates. Merging after the final propagation makes a pair over two
//! copies of the same graph collapse exactly onto the single-branch model.
//!
//! Everything runs in f64 and is deterministic given the seed: Glorot
//! initialization, dropout masks, and optimizer steps all draw from one
//! seeded stream in a fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, Graph};
use crate::matrix::DenseMatrix;
use crate::sparse::{spmm, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Gcn,
    Sgc { hops: usize },
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "gcn" => Ok(ModelKind::Gcn),
            "sgc" => Ok(ModelKind::Sgc { hops: 2 }),
            other => {
                if let Some(h) = other.strip_prefix("sgc:") {
                    let hops: usize = h
                        .parse()
                        .map_err(|_| Error::validation(format!("bad hop count in '{other}'")))?;
                    if hops == 0 {
                        return Err(Error::validation("sgc hop count must be at least 1"));
                    }
                    Ok(ModelKind::Sgc { hops })
                } else {
                    Err(Error::validation(format!(
                        "unknown model '{other}' (expected mlp, gcn, or sgc:K)"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Mlp => write!(f, "mlp"),
            ModelKind::Gcn => write!(f, "gcn"),
            ModelKind::Sgc { hops } => write!(f, "sgc:{hops}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Total weight layers including the classifier; 1 to 3.
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        let layers = match kind {
            ModelKind::Sgc { .. } => 1,
            _ => 2,
        };
        ModelSpec {
            kind,
            layers,
            hidden: 64,
            dropout: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.layers) {
            return Err(Error::validation(format!(
                "layers must be 1..=3, got {}",
                self.layers
            )));
        }
        if let ModelKind::Sgc { hops } = self.kind {
            if hops == 0 {
                return Err(Error::validation("sgc hop count must be at least 1"));
            }
            if self.layers != 1 {
                return Err(Error::validation(
                    "sgc is a single linear layer; set layers = 1",
                ));
            }
        }
        if self.layers >= 2 && self.hidden == 0 {
            return Err(Error::validation("hidden width must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    300
}
fn default_lr() -> f64 {
    1e-2
}
fn default_wd() -> f64 {
    5e-4
}
fn default_optimizer() -> Optimizer {
    Optimizer::Adam
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            optimizer: default_optimizer(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::validation("learning_rate must be finite and >= 0"));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::validation("weight_decay must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Disjoint node index sets for training, model selection, and testing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DataSplit {
    /// Random 50/25/25 split of `0..n`, each part sorted ascending.
    pub fn random(n: usize, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let n_train = (n as f64 * 0.5).round() as usize;
        let n_val = (n as f64 * 0.25).round() as usize;
        let mut train: Vec<usize> = order[..n_train].to_vec();
        let mut val: Vec<usize> = order[n_train..n_train + n_val].to_vec();
        let mut test: Vec<usize> = order[n_train + n_val..].to_vec();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        DataSplit { train, val, test }
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::validation("training set is empty"));
        }
        let mut seen = vec![false; num_nodes];
        for (name, part) in [
            ("train", &self.train),
            ("val", &self.val),
            ("test", &self.test),
        ] {
            for &u in part.iter() {
                if u >= num_nodes {
                    return Err(Error::validation(format!(
                        "{name} split references node {u}, graph has {num_nodes}"
                    )));
                }
                if seen[u] {
                    return Err(Error::validation(format!(
                        "node {u} appears in more than one split part"
                    )));
                }
                seen[u] = true;
            }
        }
        Ok(())
    }
}

/// How many propagation sources feed the model and how branch weights relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wiring {
    Single,
    /// Two graphs, one shared branch weight set, embeddings averaged.
    SharedPair,
    /// Two graphs, independent branch weights, embeddings concatenated.
    SeparatePair,
}

impl Wiring {
    fn applications(self) -> usize {
        match self {
            Wiring::Single => 1,
            _ => 2,
        }
    }

    fn branch_sets(self) -> usize {
        match self {
            Wiring::SeparatePair => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Linear {
    w: DenseMatrix,
    b: Vec<f64>,
}

impl Linear {
    fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Linear {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Linear {
            w: DenseMatrix::from_vec(fan_in, fan_out, data).expect("sized buffer"),
            b: vec![0.0; fan_out],
        }
    }

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut out = x.matmul(&self.w);
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&self.b) {
                *o += b;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    wiring: Wiring,
    in_dim: usize,
    num_classes: usize,
    branches: Vec<Vec<Linear>>,
    classifier: Linear,
}

/// Training record. Accuracies are fractions over the respective split part;
/// an empty part reports 0. `loss_curve[e]` is the cross-entropy observed on
/// the forward pass of epoch `e` (parameters before that epoch's update).
/// Model selection state: epoch indices range over 0 (initialization)
/// through `epochs`, and `test_acc_at_best_val` is the test accuracy at the
/// epoch where validation accuracy peaked (earliest epoch wins ties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub final_train_acc: f64,
    pub final_val_acc: f64,
    pub final_test_acc: f64,
    pub loss_curve: Vec<f64>,
    pub best_val_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc_at_best_val: f64,
}

enum Prop<'a> {
    Identity,
    Matrix(&'a CsrMatrix),
}

impl Prop<'_> {
    fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Prop::Identity => Ok(m.clone()),
            Prop::Matrix(p) => spmm(p, m),
        }
    }
}

struct AppTrace {
    /// Inputs to each hidden linear layer (after propagation).
    us: Vec<DenseMatrix>,
    /// Post-ReLU activations per hidden layer (ReLU mask source).
    rs: Vec<DenseMatrix>,
    /// Scaled dropout masks per hidden layer, when dropout was active.
    masks: Vec<Option<Vec<f64>>>,
    embedding: DenseMatrix,
}

struct Trace {
    apps: Vec<AppTrace>,
    combined: DenseMatrix,
    logits: DenseMatrix,
}

struct Gradients {
    branches: Vec<Vec<(DenseMatrix, Vec<f64>)>>,
    classifier: (DenseMatrix, Vec<f64>),
}

impl Model {
    fn init(
        spec: &ModelSpec,
        wiring: Wiring,
        in_dim: usize,
        num_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Model {
        let hidden_layers = spec.layers - 1;
        let branch_out = if hidden_layers == 0 { in_dim } else { spec.hidden };
        let mut branches = Vec::new();
        for _ in 0..wiring.branch_sets() {
            let mut layers = Vec::new();
            for l in 0..hidden_layers {
                let fan_in = if l == 0 { in_dim } else { spec.hidden };
                layers.push(Linear::glorot(rng, fan_in, spec.hidden));
            }
            branches.push(layers);
        }
        let clf_in = match wiring {
            Wiring::SeparatePair => branch_out * 2,
            _ => branch_out,
        };
        let classifier = Linear::glorot(rng, clf_in, num_classes);
        Model {
            spec: *spec,
            wiring,
            in_dim,
            num_classes,
            branches,
            classifier,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn wiring(&self) -> Wiring {
        self.wiring
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Total scalar parameters, classifier included.
    pub fn parameter_count(&self) -> usize {
        let mut count = self.classifier.w.data().len() + self.classifier.b.len();
        for branch in &self.branches {
            for lin in branch {
                count += lin.w.data().len() + lin.b.len();
            }
        }
        count
    }

    /// Scalar parameters in the branch stacks only (classifier excluded).
    pub fn branch_parameter_count(&self) -> usize {
        self.branches
            .iter()
            .flatten()
            .map(|lin| lin.w.data().len() + lin.b.len())
            .sum()
    }

    /// Clean logits (no dropout) for the graphs this model was wired for.
    pub fn logits(&self, inputs: &DenseMatrix, graphs: &[&Graph]) -> Result<DenseMatrix> {
        let props = props_for(self.spec.kind, self.wiring, graphs, inputs.rows())?;
        self.logits_with_props(inputs, &props)
    }

    /// As `logits`, with pre-normalized propagation matrices.
    pub fn logits_with_props(
        &self,
        inputs: &DenseMatrix,
        props: &[CsrMatrix],
    ) -> Result<DenseMatrix> {
        let prop_refs = resolve_props(self.spec.kind, self.wiring, props, inputs.rows())?;
        let trace = forward(self, inputs, &prop_refs, None, None)?;
        Ok(trace.logits)
    }

    /// Post-ReLU activations of the first hidden layer of branch 0, computed
    /// without dropout. This is the representation extracted by pretrained
    /// bases. Requires at least 2 layers.
    pub fn hidden_activations(
        &self,
        inputs: &DenseMatrix,
        graphs: &[&Graph],
    ) -> Result<DenseMatrix> {
        if self.spec.layers < 2 {
            return Err(Error::validation(
                "model has no hidden layer to extract activations from",
            ));
        }
        let props = props_for(self.spec.kind, self.wiring, graphs, inputs.rows())?;
        let prop_refs = resolve_props(self.spec.kind, self.wiring, props.as_slice(), inputs.rows())?;
        let trace = forward(self, inputs, &prop_refs, None, None)?;
        Ok(trace.apps.into_iter().next().expect("at least one app").rs[0].clone())
    }
}

fn props_for(
    kind: ModelKind,
    wiring: Wiring,
    graphs: &[&Graph],
    num_rows: usize,
) -> Result<Vec<CsrMatrix>> {
    let needed = match kind {
        ModelKind::Mlp => 0,
        _ => wiring.applications(),
    };
    if graphs.len() != needed {
        return Err(Error::validation(format!(
            "model expects {needed} graph(s), got {}",
            graphs.len()
        )));
    }
    for g in graphs {
        if g.num_nodes() != num_rows {
            return Err(Error::validation(format!(
                "graph has {} nodes but inputs have {} rows",
                g.num_nodes(),
                num_rows
            )));
        }
    }
    Ok(graphs.iter().map(|g| normalized_adjacency(g)).collect())
}

fn resolve_props<'a>(
    kind: ModelKind,
    wiring: Wiring,
    props: &'a [CsrMatrix],
    num_rows: usize,
) -> Result<Vec<Prop<'a>>> {
    let apps = wiring.applications();
    match kind {
        ModelKind::Mlp => {
            if !props.is_empty() {
                return Err(Error::validation("mlp takes no propagation matrices"));
            }
            if wiring != Wiring::Single {
                return Err(Error::validation("mlp supports only single wiring"));
            }
            Ok(vec![Prop::Identity])
        }
        _ => {
            if props.len() != apps {
                return Err(Error::validation(format!(
                    "wiring needs {apps} propagation matrices, got {}",
                    props.len()
                )));
            }
            for p in props {
                if p.rows() != num_rows || p.cols() != num_rows {
                    return Err(Error::validation(
                        "propagation matrix shape does not match inputs",
                    ));
                }
            }
            Ok(props.iter().map(Prop::Matrix).collect())
        }
    }
}

fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(|x| if x > 0.0 { x } else { 0.0 })
}

/// Forward pass. `dropout_rng` enables inverted dropout on hidden
/// activations; `cached_first` optionally holds the per-application constant
/// part (the propagated inputs, or the fully aggregated inputs for Sgc).
fn forward(
    model: &Model,
    inputs: &DenseMatrix,
    props: &[Prop<'_>],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
    cached_first: Option<&[DenseMatrix]>,
) -> Result<Trace> {
    let spec = &model.spec;
    let mut apps = Vec::with_capacity(props.len());
    for (a, prop) in props.iter().enumerate() {
        let branch = &model.branches[match model.wiring {
            Wiring::SeparatePair => a,
            _ => 0,
        }];
        if let ModelKind::Sgc { hops } = spec.kind {
            let embedding = match cached_first {
                Some(cache) => cache[a].clone(),
                None => {
                    let mut e = prop.apply(inputs)?;
                    for _ in 1..hops {
                        e = prop.apply(&e)?;
                    }
                    e
                }
            };
            apps.push(AppTrace {
                us: Vec::new(),
                rs: Vec::new(),
                masks: Vec::new(),
                embedding,
            });
            continue;
        }

        let mut us = Vec::new();
        let mut rs = Vec::new();
        let mut masks = Vec::new();
        let mut activation = None;
        for (l, lin) in branch.iter().enumerate() {
            let u = if l == 0 {
                match cached_first {
                    Some(cache) => cache[a].clone(),
                    None => prop.apply(inputs)?,
                }
            } else {
                prop.apply(activation.as_ref().expect("layer above exists"))?
            };
            let z = lin.apply(&u);
            let mut r = relu(&z);
            let mask = match (&mut dropout_rng, spec.dropout > 0.0) {
                (Some(rng), true) => {
                    let keep = 1.0 - spec.dropout;
                    let scale = keep.recip();
                    let mask: Vec<f64> = (0..r.data().len())
                        .map(|_| if rng.gen::<f64>() < spec.dropout { 0.0 } else { scale })
                        .collect();
                    for (x, &m) in r.data_mut().iter_mut().zip(&mask) {
                        *x *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            us.push(u);
            // rs stores the activation that actually flows onward; the ReLU
            // mask is recovered from positivity, which dropout preserves.
            rs.push(r.clone());
            masks.push(mask);
            activation = Some(r);
        }
        let last = activation.unwrap_or_else(|| inputs.clone());
        let embedding = match spec.kind {
            ModelKind::Gcn => prop.apply(&last)?,
            _ => last,
        };
        apps.push(AppTrace {
            us,
            rs,
            masks,
            embedding,
        });
    }

    let combined = match model.wiring {
        Wiring::Single => apps[0].embedding.clone(),
        Wiring::SharedPair => DenseMatrix::mean_of(&apps[0].embedding, &apps[1].embedding),
        Wiring::SeparatePair => DenseMatrix::hstack(&apps[0].embedding, &apps[1].embedding),
    };
    let logits = model.classifier.apply(&combined);
    Ok(Trace {
        apps,
        combined,
        logits,
    })
}

/// Mean cross-entropy over `subset` rows plus its logit-space gradient
/// (softmax minus one-hot, scaled by 1/|subset|, zero elsewhere).
fn cross_entropy(
    logits: &DenseMatrix,
    labels: &[usize],
    subset: &[usize],
) -> (f64, DenseMatrix) {
    let inv = (subset.len() as f64).recip();
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &i in subset {
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln() + max;
        loss += (log_denom - row[labels[i]]) * inv;
        let g = grad.row_mut(i);
        for (j, &v) in row.iter().enumerate() {
            g[j] = ((v - max).exp() / denom) * inv;
        }
        g[labels[i]] -= inv;
    }
    (loss, grad)
}

fn backward(
    model: &Model,
    props: &[Prop<'_>],
    trace: &Trace,
    g_logits: &DenseMatrix,
) -> Result<Gradients> {
    let spec = &model.spec;
    let g_clf_w = trace.combined.matmul_at_b(g_logits);
    let g_clf_b = column_sums(g_logits);
    let g_combined = g_logits.matmul_a_bt(&model.classifier.w);

    let mut branch_grads: Vec<Vec<(DenseMatrix, Vec<f64>)>> = model
        .branches
        .iter()
        .map(|branch| {
            branch
                .iter()
                .map(|lin| {
                    (
                        DenseMatrix::zeros(lin.w.rows(), lin.w.cols()),
                        vec![0.0; lin.b.len()],
                    )
                })
                .collect()
        })
        .collect();

    for (a, prop) in props.iter().enumerate() {
        let branch_idx = match model.wiring {
            Wiring::SeparatePair => a,
            _ => 0,
        };
        let branch = &model.branches[branch_idx];
        if matches!(spec.kind, ModelKind::Sgc { .. }) {
            continue;
        }
        let app = &trace.apps[a];
        // Gradient flowing into this application's embedding.
        let g_embedding = match model.wiring {
            Wiring::Single => g_combined.clone(),
            Wiring::SharedPair => g_combined.map(|x| 0.5 * x),
            Wiring::SeparatePair => {
                let width = app.embedding.cols();
                let mut part = DenseMatrix::zeros(g_combined.rows(), width);
                for i in 0..g_combined.rows() {
                    let src = &g_combined.row(i)[a * width..(a + 1) * width];
                    part.row_mut(i).copy_from_slice(src);
                }
                part
            }
        };
        // Back through the final propagation (A_hat is symmetric).
        let mut g_act = match spec.kind {
            ModelKind::Gcn => prop.apply(&g_embedding)?,
            _ => g_embedding,
        };
        for l in (0..branch.len()).rev() {
            let mut g_z = g_act;
            if let Some(mask) = &app.masks[l] {
                for (g, &m) in g_z.data_mut().iter_mut().zip(mask) {
                    *g *= m;
                }
            }
            // ReLU mask from the stored (possibly masked) activation: a zero
            // activation means the unit passed nothing forward either way.
            for (g, &r) in g_z.data_mut().iter_mut().zip(app.rs[l].data()) {
                if r <= 0.0 {
                    *g = 0.0;
                }
            }
            let gw = app.us[l].matmul_at_b(&g_z);
            let gb = column_sums(&g_z);
            let (acc_w, acc_b) = &mut branch_grads[branch_idx][l];
            for (dst, src) in acc_w.data_mut().iter_mut().zip(gw.data()) {
                *dst += src;
            }
            for (dst, src) in acc_b.iter_mut().zip(&gb) {
                *dst += src;
            }
            if l > 0 {
                let g_u = g_z.matmul_a_bt(&branch[l].w);
                g_act = prop.apply(&g_u)?;
            } else {
                g_act = g_z; // unused beyond this point
            }
        }
        drop(g_act);
    }

    Ok(Gradients {
        branches: branch_grads,
        classifier: (g_clf_w, g_clf_b),
    })
}

fn column_sums(m: &DenseMatrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (o, &v) in out.iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

struct AdamBuf {
    m: Vec<f64>,
    v: Vec<f64>,
}

struct OptimizerState {
    cfg: TrainConfig,
    step: usize,
    buffers: Vec<AdamBuf>,
}

impl OptimizerState {
    fn new(cfg: &TrainConfig, tensor_sizes: &[usize]) -> Self {
        let buffers = tensor_sizes
            .iter()
            .map(|&s| AdamBuf {
                m: vec![0.0; s],
                v: vec![0.0; s],
            })
            .collect();
        OptimizerState {
            cfg: *cfg,
            step: 0,
            buffers,
        }
    }

    fn apply(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.step += 1;
        let lr = self.cfg.learning_rate;
        let wd = self.cfg.weight_decay;
        match self.cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, &gx) in p.iter_mut().zip(g.iter()) {
                        *x -= lr * (gx + wd * *x);
                    }
                }
            }
            Optimizer::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                let t = self.step as i32;
                let bc1 = 1.0 - B1.powi(t);
                let bc2 = 1.0 - B2.powi(t);
                for ((p, g), buf) in params.iter_mut().zip(grads).zip(&mut self.buffers) {
                    for ((x, &gx), (m, v)) in p
                        .iter_mut()
                        .zip(g.iter())
                        .zip(buf.m.iter_mut().zip(buf.v.iter_mut()))
                    {
                        let grad = gx + wd * *x;
                        *m = B1 * *m + (1.0 - B1) * grad;
                        *v = B2 * *v + (1.0 - B2) * grad * grad;
                        let m_hat = *m / bc1;
                        let v_hat = *v / bc2;
                        *x -= lr * m_hat / (v_hat.sqrt() + EPS);
                    }
                }
            }
        }
    }
}

/// Trains a single-source model. `graphs` is empty for `Mlp` and holds one
/// graph otherwise; multi-graph wirings go through `train_with_plan`.
pub fn train(
    spec: &ModelSpec,
    inputs: &DenseMatrix,
    graphs: &[&Graph],
    labels: &[usize],
    split: &DataSplit,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    if graphs.len() > 1 {
        return Err(Error::validation(
            "multiple graphs require a fusion plan; see fusion::plan_training",
        ));
    }
    let props = props_for(spec.kind, Wiring::Single, graphs, inputs.rows())?;
    train_core(spec, inputs, &props, Wiring::Single, labels, split, cfg)
}

pub(crate) fn train_core(
    spec: &ModelSpec,
    inputs: &DenseMatrix,
    props: &[CsrMatrix],
    wiring: Wiring,
    labels: &[usize],
    split: &DataSplit,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    spec.validate()?;
    cfg.validate()?;
    if labels.len() != inputs.rows() {
        return Err(Error::validation(format!(
            "{} labels for {} input rows",
            labels.len(),
            inputs.rows()
        )));
    }
    if inputs.rows() == 0 || inputs.cols() == 0 {
        return Err(Error::validation("inputs must be non-empty"));
    }
    split.validate(inputs.rows())?;
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if num_classes < 2 {
        return Err(Error::validation("training needs at least 2 classes"));
    }

    let prop_refs = resolve_props(spec.kind, wiring, props, inputs.rows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(spec, wiring, inputs.cols(), num_classes, &mut rng);

    // Constant per-application prefix: propagated inputs (or the full Sgc
    // aggregate), computed once.
    let mut cached_first = Vec::with_capacity(prop_refs.len());
    for prop in &prop_refs {
        let c = match spec.kind {
            ModelKind::Sgc { hops } => {
                let mut e = prop.apply(inputs)?;
                for _ in 1..hops {
                    e = prop.apply(&e)?;
                }
                e
            }
            _ => prop.apply(inputs)?,
        };
        cached_first.push(c);
    }

    let tensor_sizes = tensor_layout(&model);
    let mut opt = OptimizerState::new(cfg, &tensor_sizes);
    let uses_dropout = spec.dropout > 0.0;

    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    // (epoch, val accuracy, test accuracy) at the best validation point.
    let mut best = (0usize, f64::NEG_INFINITY, 0.0);
    let mut finals = (0.0, 0.0, 0.0);

    for epoch in 0..cfg.epochs {
        let trace = forward(
            &model,
            inputs,
            &prop_refs,
            if uses_dropout { Some(&mut rng) } else { None },
            Some(&cached_first),
        )?;
        let (loss, g_logits) = cross_entropy(&trace.logits, labels, &split.train);
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "training loss became non-finite at epoch {epoch}"
            )));
        }
        loss_curve.push(loss);

        if uses_dropout {
            // Accuracy tracking needs a clean pass when masks are active.
            let clean = forward(&model, inputs, &prop_refs, None, Some(&cached_first))?;
            track_state(&clean.logits, labels, split, epoch, &mut best, &mut finals);
        } else {
            track_state(&trace.logits, labels, split, epoch, &mut best, &mut finals);
        }

        let grads = backward(&model, &prop_refs, &trace, &g_logits)?;
        apply_gradients(&mut model, &grads, &mut opt);
    }

    // Final parameter state counts as epoch `epochs`.
    let trace = forward(&model, inputs, &prop_refs, None, Some(&cached_first))?;
    track_state(&trace.logits, labels, split, cfg.epochs, &mut best, &mut finals);

    let (best_val_epoch, best_val_acc, test_acc_at_best_val) = if split.val.is_empty() {
        (cfg.epochs, 0.0, finals.2)
    } else {
        best
    };

    Ok((
        model,
        TrainReport {
            final_train_acc: finals.0,
            final_val_acc: finals.1,
            final_test_acc: finals.2,
            loss_curve,
            best_val_epoch,
            best_val_acc,
            test_acc_at_best_val,
        },
    ))
}

fn track_state(
    logits: &DenseMatrix,
    labels: &[usize],
    split: &DataSplit,
    epoch: usize,
    best: &mut (usize, f64, f64),
    finals: &mut (f64, f64, f64),
) {
    let train_acc = accuracy(logits, labels, &split.train);
    let val_acc = accuracy(logits, labels, &split.val);
    let test_acc = accuracy(logits, labels, &split.test);
    if val_acc > best.1 {
        *best = (epoch, val_acc, test_acc);
    }
    *finals = (train_acc, val_acc, test_acc);
}

fn tensor_layout(model: &Model) -> Vec<usize> {
    let mut sizes = Vec::new();
    for branch in &model.branches {
        for lin in branch {
            sizes.push(lin.w.data().len());
            sizes.push(lin.b.len());
        }
    }
    sizes.push(model.classifier.w.data().len());
    sizes.push(model.classifier.b.len());
    sizes
}

fn apply_gradients(model: &mut Model, grads: &Gradients, opt: &mut OptimizerState) {
    let mut params: Vec<&mut [f64]> = Vec::new();
    let mut gslices: Vec<&[f64]> = Vec::new();
    for (branch, gbranch) in model.branches.iter_mut().zip(&grads.branches) {
        for (lin, (gw, gb)) in branch.iter_mut().zip(gbranch) {
            params.push(lin.w.data_mut());
            gslices.push(gw.data());
            params.push(&mut lin.b);
            gslices.push(gb);
        }
    }
    params.push(model.classifier.w.data_mut());
    gslices.push(grads.classifier.0.data());
    params.push(&mut model.classifier.b);
    gslices.push(&grads.classifier.1);
    opt.apply(&mut params, &gslices);
}

/// Fraction of `subset` rows whose argmax logit matches the label. Ties go
/// to the lowest class id. Empty subsets report 0.
pub(crate) fn accuracy(logits: &DenseMatrix, labels: &[usize], subset: &[usize]) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for &i in subset {
        let row = logits.row(i);
        let mut arg = 0usize;
        let mut best = row[0];
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                arg = j;
            }
        }
        if arg == labels[i] {
            correct += 1;
        }
    }
    correct as f64 / subset.len() as f64
}

/// Accuracy of a trained model on `node_set` (clean forward pass).
pub fn evaluate(
    model: &Model,
    inputs: &DenseMatrix,
    graphs: &[&Graph],
    labels: &[usize],
    node_set: &[usize],
) -> Result<f64> {
    if node_set.is_empty() {
        return Err(Error::validation("evaluation node set is empty"));
    }
    if labels.len() != inputs.rows() {
        return Err(Error::validation("labels do not match input rows"));
    }
    for &u in node_set {
        if u >= inputs.rows() {
            return Err(Error::validation(format!(
                "evaluation set references row {u}, inputs have {}",
                inputs.rows()
            )));
        }
    }
    let logits = model.logits(inputs, graphs)?;
    Ok(accuracy(&logits, labels, node_set))
}

/// Compares analytic gradients against central finite differences on the
/// given instance; returns the largest relative error over all parameters.
/// Dropout is forced off so the loss is deterministic. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check(
    spec: &ModelSpec,
    inputs: &DenseMatrix,
    graphs: &[&Graph],
    labels: &[usize],
    train_set: &[usize],
    seed: u64,
) -> Result<f64> {
    let props = props_for(spec.kind, Wiring::Single, graphs, inputs.rows())?;
    gradient_check_core(spec, inputs, &props, Wiring::Single, labels, train_set, seed)
}

pub(crate) fn gradient_check_core(
    spec: &ModelSpec,
    inputs: &DenseMatrix,
    props: &[CsrMatrix],
    wiring: Wiring,
    labels: &[usize],
    train_set: &[usize],
    seed: u64,
) -> Result<f64> {
    let mut spec = *spec;
    spec.dropout = 0.0;
    spec.validate()?;
    if train_set.is_empty() {
        return Err(Error::validation("gradient check needs train rows"));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    if num_classes < 2 {
        return Err(Error::validation("gradient check needs at least 2 classes"));
    }
    let prop_refs = resolve_props(spec.kind, wiring, props, inputs.rows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::init(&spec, wiring, inputs.cols(), num_classes, &mut rng);

    let trace = forward(&model, inputs, &prop_refs, None, None)?;
    let (_, g_logits) = cross_entropy(&trace.logits, labels, train_set);
    let grads = backward(&model, &prop_refs, &trace, &g_logits)?;

    // Flatten analytic gradients in the same order parameters are visited.
    let mut analytic: Vec<f64> = Vec::new();
    for branch in &grads.branches {
        for (gw, gb) in branch {
            analytic.extend_from_slice(gw.data());
            analytic.extend_from_slice(gb);
        }
    }
    analytic.extend_from_slice(grads.classifier.0.data());
    analytic.extend_from_slice(&grads.classifier.1);

    const STEP: f64 = 1e-5;
    let mut max_rel = 0.0f64;
    for (idx, &a) in analytic.iter().enumerate() {
        let orig = read_param(&model, idx);
        write_param(&mut model, idx, orig + STEP);
        let plus = loss_only(&model, inputs, &prop_refs, labels, train_set)?;
        write_param(&mut model, idx, orig - STEP);
        let minus = loss_only(&model, inputs, &prop_refs, labels, train_set)?;
        write_param(&mut model, idx, orig);
        let numeric = (plus - minus) / (2.0 * STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

fn loss_only(
    model: &Model,
    inputs: &DenseMatrix,
    props: &[Prop<'_>],
    labels: &[usize],
    train_set: &[usize],
) -> Result<f64> {
    let trace = forward(model, inputs, props, None, None)?;
    Ok(cross_entropy(&trace.logits, labels, train_set).0)
}

fn param_slot(model: &mut Model, mut idx: usize) -> &mut f64 {
    for branch in model.branches.iter_mut() {
        for lin in branch.iter_mut() {
            let wl = lin.w.data().len();
            if idx < wl {
                return &mut lin.w.data_mut()[idx];
            }
            idx -= wl;
            if idx < lin.b.len() {
                return &mut lin.b[idx];
            }
            idx -= lin.b.len();
        }
    }
    let wl = model.classifier.w.data().len();
    if idx < wl {
        return &mut model.classifier.w.data_mut()[idx];
    }
    idx -= wl;
    &mut model.classifier.b[idx]
}

fn read_param(model: &Model, idx: usize) -> f64 {
    // Immutable twin of param_slot; both must visit tensors in the same
    // order as the gradient flattening above.
    let mut i = idx;
    for branch in &model.branches {
        for lin in branch {
            let wl = lin.w.data().len();
            if i < wl {
                return lin.w.data()[i];
            }
            i -= wl;
            if i < lin.b.len() {
                return lin.b[i];
            }
            i -= lin.b.len();
        }
    }
    let wl = model.classifier.w.data().len();
    if i < wl {
        return model.classifier.w.data()[i];
    }
    i -= wl;
    model.classifier.b[i]
}

fn write_param(model: &mut Model, idx: usize, value: f64) {
    *param_slot(model, idx) = value;
}
