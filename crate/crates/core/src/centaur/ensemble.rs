use super::{model_hash, Cap, CentaurModel, CentaurSpec, Predictor, Residual};
use crate::datasets::{sha256_hex, LabeledDataset};
use crate::models::{validate_labels, FitConfig, FittedModel, Loss};
use crate::numerics::{minimize, project_l1_ball, Objective, ParamVector};
use crate::{Error, Result};

/// `sum_j theta[j] * outputs[j] + intercept`, members in order, intercept last.
pub(crate) fn combine(theta: &[f64], outputs: &[f64]) -> f64 {
    let mut z = 0.0;
    for (w, o) in theta.iter().zip(outputs) {
        z += w * o;
    }
    z + theta[outputs.len()]
}

/// Loss of the linear combiner over precomputed member outputs.
pub struct StackObjective {
    outputs: Vec<f64>,
    n_members: usize,
    targets: Vec<f64>,
    loss: Loss,
}

impl StackObjective {
    pub fn new(outputs: Vec<f64>, n_members: usize, targets: Vec<f64>, loss: Loss) -> Result<Self> {
        if outputs.len() != targets.len() * n_members {
            return Err(Error::Dimension {
                expected: targets.len() * n_members,
                got: outputs.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            outputs,
            n_members,
            targets,
            loss,
        })
    }
}

impl Objective for StackObjective {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let n = self.targets.len() as f64;
        let mut total = 0.0;
        for (o, &y) in self.outputs.chunks_exact(self.n_members).zip(&self.targets) {
            let (l, dl) = self.loss.eval(combine(theta, o), y);
            total += l;
            let dl = dl / n;
            for (g, oj) in grad.iter_mut().zip(o) {
                *g += dl * oj;
            }
            grad[self.n_members] += dl;
        }
        total / n
    }
}

fn stack_layout(n_machine: usize, n_human: usize) -> Vec<(&'static str, usize)> {
    let mut layout = vec![("machine", n_machine)];
    if n_human > 0 {
        layout.push(("human", n_human));
    }
    layout.push(("intercept", 1));
    layout
}

/// Stacks member raw outputs with a linear meta-learner trained on d_data.
///
/// The combiner starts as the uniform average of the machine members and
/// the human-member weights are held in an L1 ball of radius
/// `contribution_cap`.
pub fn ensemble_stack(
    machine_models: &[FittedModel],
    human_models: &[FittedModel],
    d_data: &LabeledDataset,
    contribution_cap: Cap,
    cfg: &FitConfig,
) -> Result<CentaurModel> {
    let spec = CentaurSpec::EnsembleStack { contribution_cap };
    spec.validate()?;
    if machine_models.is_empty() {
        return Err(Error::InvalidArgument("ensemble_stack needs at least one machine member".into()));
    }
    let members: Vec<&FittedModel> = machine_models.iter().chain(human_models).collect();
    let task = members[0].task();
    let dim = members[0].source_dim();
    if members.iter().any(|m| m.task() != task || m.source_dim() != dim) {
        return Err(Error::InvalidArgument("inconsistent member output spaces".into()));
    }
    if task != cfg.task {
        return Err(Error::Config("combiner task differs from member task".into()));
    }
    validate_labels(d_data, task)?;
    let (n_machine, n_human) = (machine_models.len(), human_models.len());
    let n_members = members.len();
    let mut outputs = Vec::with_capacity(d_data.n_records() * n_members);
    for row in d_data.rows() {
        for m in &members {
            outputs.push(m.raw_score(row)?);
        }
    }
    let objective = StackObjective::new(outputs, n_members, d_data.labels().to_vec(), cfg.loss)?;

    let mut init = ParamVector::zeros(&stack_layout(n_machine, n_human));
    for w in init.segment_mut("machine").expect("machine segment") {
        *w = 1.0 / n_machine as f64;
    }
    let human_range = n_machine..n_machine + n_human;
    let radius = contribution_cap.unwrap_or(f64::INFINITY);
    let projector = |theta: &mut [f64]| project_l1_ball(&mut theta[human_range.clone()], radius);
    let outcome = minimize(&objective, &init, Some(&projector), &cfg.descent)?;
    let params = outcome.params;
    let human_l1 = params.values()[human_range.clone()].iter().map(|v| v.abs()).sum();

    let hash_of = |models: &[FittedModel]| {
        let joined: Vec<String> = models.iter().map(model_hash).collect();
        sha256_hex(joined.join(",").as_bytes())
    };
    CentaurModel::build(
        &spec,
        params,
        Predictor::Stack {
            machine: machine_models.to_vec(),
            human: human_models.to_vec(),
            task,
        },
        vec![Residual::new("human_weight_l1", human_l1, contribution_cap)],
        hash_of(machine_models),
        hash_of(human_models),
    )
}
