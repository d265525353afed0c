use serde::{Deserialize, Serialize};

use super::{Architecture, ModelKind, ModelSnapshot, Standardizer};
use crate::constants::DECISION_THRESHOLD;
use crate::datasets::{LabeledDataset, TaskKind};
use crate::numerics::{minimize, sigmoid, softplus, DescentOptions, Objective, ParamVector, Projector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Logistic,
    Squared,
}

impl Loss {
    pub fn for_task(task: TaskKind) -> Self {
        match task {
            TaskKind::Binary => Loss::Logistic,
            TaskKind::Regression => Loss::Squared,
        }
    }

    /// Per-record loss of raw output `out` against `target`, with its
    /// derivative in `out`.
    pub fn eval(self, out: f64, target: f64) -> (f64, f64) {
        match self {
            Loss::Logistic => (softplus(out) - target * out, sigmoid(out) - target),
            Loss::Squared => {
                let r = out - target;
                (0.5 * r * r, r)
            }
        }
    }
}

/// Options for [`fit_supervised`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub kind: ModelKind,
    pub task: TaskKind,
    pub loss: Loss,
    #[serde(default)]
    pub l2_reg: f64,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub descent: DescentOptions,
}

fn default_true() -> bool {
    true
}

impl FitConfig {
    pub fn new(kind: ModelKind, task: TaskKind) -> Self {
        Self {
            kind,
            task,
            loss: Loss::for_task(task),
            l2_reg: 0.0,
            standardize: true,
            descent: DescentOptions::default(),
        }
    }

    pub fn with_l2(mut self, l2_reg: f64) -> Self {
        self.l2_reg = l2_reg;
        self
    }

    pub fn with_descent(mut self, descent: DescentOptions) -> Self {
        self.descent = descent;
        self
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.loss != Loss::for_task(self.task) {
            return Err(Error::Config(format!(
                "loss {:?} does not match task {:?}",
                self.loss, self.task
            )));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return Err(Error::Config("l2_reg must be finite and nonnegative".into()));
        }
        if let ModelKind::Mlp { hidden: 0 } = self.kind {
            return Err(Error::Config("mlp hidden width must be positive".into()));
        }
        self.descent.validate()
    }
}

/// Mean per-record loss plus `0.5 * l2 * |weights|^2` over prepared inputs.
#[derive(Debug, Clone)]
pub struct SupervisedObjective {
    arch: Architecture,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    loss: Loss,
    l2_reg: f64,
}

impl SupervisedObjective {
    pub fn new(arch: Architecture, inputs: Vec<f64>, targets: Vec<f64>, loss: Loss, l2_reg: f64) -> Result<Self> {
        let d = arch.inputs();
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != targets.len() * d {
            return Err(Error::Dimension {
                expected: targets.len() * d,
                got: inputs.len(),
            });
        }
        Ok(Self {
            arch,
            inputs,
            targets,
            loss,
            l2_reg,
        })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn n_records(&self) -> usize {
        self.targets.len()
    }

    /// Adds `scale * mean_i dloss_i/dout * d(out_i)/d(theta)` into `grad` and
    /// returns `scale * mean loss`, without regularization.
    pub fn accumulate_data_term(&self, theta: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let d = self.arch.inputs();
        let n = self.targets.len() as f64;
        let mut total = 0.0;
        for (x, &y) in self.inputs.chunks_exact(d.max(1)).zip(&self.targets) {
            let x = &x[..d];
            let out = self.arch.forward(theta, x);
            let (l, dl) = self.loss.eval(out, y);
            total += l;
            self.arch.accumulate_gradient(theta, x, scale * dl / n, grad);
        }
        scale * total / n
    }

    pub fn data_loss(&self, theta: &[f64]) -> f64 {
        let d = self.arch.inputs();
        let n = self.targets.len() as f64;
        self.inputs
            .chunks_exact(d.max(1))
            .zip(&self.targets)
            .map(|(x, &y)| self.loss.eval(self.arch.forward(theta, &x[..d]), y).0)
            .sum::<f64>()
            / n
    }

    pub fn outputs(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.arch.inputs();
        self.inputs
            .chunks_exact(d.max(1))
            .take(self.targets.len())
            .map(|x| self.arch.forward(theta, &x[..d]))
            .collect()
    }
}

pub(crate) fn add_l2(arch: &Architecture, l2_reg: f64, theta: &[f64], grad: &mut [f64]) -> f64 {
    if l2_reg == 0.0 {
        return 0.0;
    }
    let mut penalty = 0.0;
    for r in arch.weight_ranges() {
        for i in r {
            penalty += theta[i] * theta[i];
            grad[i] += l2_reg * theta[i];
        }
    }
    0.5 * l2_reg * penalty
}

impl Objective for SupervisedObjective {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let data = self.accumulate_data_term(theta, 1.0, grad);
        data + add_l2(&self.arch, self.l2_reg, theta, grad)
    }
}

/// Output of [`FittedModel::predict`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Prediction {
    Binary { probability: f64, class: u8 },
    Regression { value: f64 },
}

impl Prediction {
    /// The decision: class index for classifiers, the value for regressors.
    pub fn decision(&self) -> f64 {
        match *self {
            Prediction::Binary { class, .. } => class as f64,
            Prediction::Regression { value } => value,
        }
    }

    /// Probability of class 1, or the regression value.
    pub fn score(&self) -> f64 {
        match *self {
            Prediction::Binary { probability, .. } => probability,
            Prediction::Regression { value } => value,
        }
    }
}

/// A fitted linear or MLP predictor over an optional column view of the
/// rows it receives. Serializes as its [`ModelSnapshot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelSnapshot", try_from = "ModelSnapshot")]
pub struct FittedModel {
    arch: Architecture,
    params: ParamVector,
    task: TaskKind,
    columns: Option<Vec<usize>>,
    source_dim: usize,
    scaler: Standardizer,
}

impl FittedModel {
    pub fn from_parts(
        arch: Architecture,
        params: ParamVector,
        task: TaskKind,
        columns: Option<Vec<usize>>,
        source_dim: usize,
        scaler: Standardizer,
    ) -> Result<Self> {
        if params.len() != arch.n_params() {
            return Err(Error::Dimension {
                expected: arch.n_params(),
                got: params.len(),
            });
        }
        let view = columns.as_ref().map_or(source_dim, Vec::len);
        if view != arch.inputs() || scaler.dim() != arch.inputs() {
            return Err(Error::Dimension {
                expected: arch.inputs(),
                got: view,
            });
        }
        if let Some(cols) = &columns {
            if let Some(&bad) = cols.iter().find(|&&c| c >= source_dim) {
                return Err(Error::InvalidArgument(format!("column {bad} out of range")));
            }
        }
        Ok(Self {
            arch,
            params,
            task,
            columns,
            source_dim,
            scaler,
        })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind()
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn loss(&self) -> Loss {
        Loss::for_task(self.task)
    }

    pub fn columns(&self) -> Option<&[usize]> {
        self.columns.as_deref()
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn scaler(&self) -> &Standardizer {
        &self.scaler
    }

    /// Same model with replacement parameters of identical layout.
    pub fn with_params(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.params.len() {
            return Err(Error::Dimension {
                expected: self.params.len(),
                got: values.len(),
            });
        }
        let mut out = self.clone();
        out.params = self.params.with_values(values);
        Ok(out)
    }

    fn check_dim(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.source_dim {
            return Err(Error::Dimension {
                expected: self.source_dim,
                got: row.len(),
            });
        }
        Ok(())
    }

    fn prepare_into(&self, row: &[f64], out: &mut Vec<f64>) {
        match &self.columns {
            Some(cols) => {
                let picked: Vec<f64> = cols.iter().map(|&c| row[c]).collect();
                self.scaler.apply_into(&picked, out);
            }
            None => self.scaler.apply_into(row, out),
        }
    }

    /// The network input for `row`: column view, then standardization.
    pub fn prepare(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(row)?;
        let mut out = Vec::with_capacity(self.arch.inputs());
        self.prepare_into(row, &mut out);
        Ok(out)
    }

    /// Prepared inputs for every record, row-major.
    pub fn prepare_dataset(&self, ds: &LabeledDataset) -> Result<Vec<f64>> {
        if ds.n_features() != self.source_dim {
            return Err(Error::Dimension {
                expected: self.source_dim,
                got: ds.n_features(),
            });
        }
        let mut out = Vec::with_capacity(ds.n_records() * self.arch.inputs());
        for row in ds.rows() {
            self.prepare_into(row, &mut out);
        }
        Ok(out)
    }

    /// Raw network output: the logit for classifiers.
    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        let x = self.prepare(row)?;
        Ok(self.arch.forward(self.params.values(), &x))
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        let out = self.raw_score(row)?;
        Ok(self.output_to_prediction(out))
    }

    pub fn output_to_prediction(&self, out: f64) -> Prediction {
        prediction_from_output(self.task, out)
    }

    pub fn predict_dataset(&self, ds: &LabeledDataset) -> Result<Vec<Prediction>> {
        let inputs = self.prepare_dataset(ds)?;
        let d = self.arch.inputs();
        Ok((0..ds.n_records())
            .map(|i| {
                let x = &inputs[i * d..(i + 1) * d];
                self.output_to_prediction(self.arch.forward(self.params.values(), x))
            })
            .collect())
    }

    /// Mean unregularized loss on `ds`.
    pub fn mean_loss(&self, ds: &LabeledDataset) -> Result<f64> {
        let obj = self.objective(ds, 0.0)?;
        Ok(obj.data_loss(self.params.values()))
    }

    /// The training objective of this model's architecture and view on `ds`.
    pub fn objective(&self, ds: &LabeledDataset, l2_reg: f64) -> Result<SupervisedObjective> {
        validate_labels(ds, self.task)?;
        SupervisedObjective::new(
            self.arch,
            self.prepare_dataset(ds)?,
            ds.labels().to_vec(),
            self.loss(),
            l2_reg,
        )
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let metadata = serde_json::json!({
            "architecture": self.arch,
            "task": self.task,
            "columns": self.columns,
            "source_dim": self.source_dim,
            "scaler": self.scaler,
        });
        ModelSnapshot::new("supervised", &self.params, metadata)
    }

    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Result<Self> {
        snapshot.expect_kind("supervised")?;
        let params = snapshot.params()?;
        Self::from_parts(
            snapshot.field("architecture")?,
            params,
            snapshot.field("task")?,
            snapshot.field("columns")?,
            snapshot.field("source_dim")?,
            snapshot.field("scaler")?,
        )
    }
}

impl From<FittedModel> for ModelSnapshot {
    fn from(model: FittedModel) -> Self {
        model.snapshot()
    }
}

impl TryFrom<ModelSnapshot> for FittedModel {
    type Error = Error;

    fn try_from(snapshot: ModelSnapshot) -> Result<Self> {
        FittedModel::from_snapshot(&snapshot)
    }
}

/// Maps a raw output to a prediction: `sigmoid` and a 0.5 threshold for
/// binary tasks, the value itself for regression.
pub fn prediction_from_output(task: TaskKind, out: f64) -> Prediction {
    match task {
        TaskKind::Binary => {
            let probability = sigmoid(out);
            Prediction::Binary {
                probability,
                class: u8::from(probability >= DECISION_THRESHOLD),
            }
        }
        TaskKind::Regression => Prediction::Regression { value: out },
    }
}

pub(crate) fn validate_labels(ds: &LabeledDataset, task: TaskKind) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if task == TaskKind::Binary {
        if let Some(i) = ds.labels().iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "binary label at record {i} is {}, expected 0 or 1",
                ds.label(i)
            )));
        }
    }
    Ok(())
}

/// Fits a model on every column of `ds`.
pub fn fit_supervised(ds: &LabeledDataset, cfg: &FitConfig) -> Result<FittedModel> {
    fit_supervised_view(ds, None, cfg)
}

/// Fits a model that reads only `columns` of each row (all columns if `None`).
pub fn fit_supervised_view(ds: &LabeledDataset, columns: Option<&[usize]>, cfg: &FitConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let untrained = untrained_model(ds, columns, cfg)?;
    let init = untrained.params.clone();
    fit_from(&untrained, ds, &init, None, cfg)
}

/// An untrained model whose scaler is fit on `ds` (restricted to `columns`).
pub fn untrained_model(ds: &LabeledDataset, columns: Option<&[usize]>, cfg: &FitConfig) -> Result<FittedModel> {
    validate_labels(ds, cfg.task)?;
    let view = match columns {
        Some(cols) => ds.select_columns(cols)?,
        None => ds.clone(),
    };
    let dim = view.n_features();
    let scaler = if cfg.standardize {
        Standardizer::fit(view.features_flat(), dim)
    } else {
        Standardizer::identity(dim)
    };
    let arch = cfg.kind.architecture(dim);
    FittedModel::from_parts(
        arch,
        arch.init(cfg.descent.seed),
        cfg.task,
        columns.map(<[usize]>::to_vec),
        ds.n_features(),
        scaler,
    )
}

/// Trains `model`'s architecture on `ds` starting from `init`, keeping the
/// model's view and scaler.
pub fn fit_from(
    model: &FittedModel,
    ds: &LabeledDataset,
    init: &ParamVector,
    projector: Option<&dyn Projector>,
    cfg: &FitConfig,
) -> Result<FittedModel> {
    let objective = model.objective(ds, cfg.l2_reg)?;
    let outcome = minimize(&objective, init, projector, &cfg.descent)?;
    model.with_params(outcome.params.into_values())
}
