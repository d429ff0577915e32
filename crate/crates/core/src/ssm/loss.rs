use crate::autodiff::{Tape, Tensor, TensorError, Var};
use crate::flow::tensor_points;
use crate::mesh::{KdTree, Vec3};

/// Which terms of the Chamfer distance between deformed points and the
/// target enter the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    Symmetric,
    /// Mean distance from each deformed point to the target. Unobserved
    /// target regions exert no pull (partial surfaces).
    OneSidedDeformedToTarget,
    /// Mean distance from each target point to the deformed points. Every
    /// observation must be explained (sparse point clouds).
    OneSidedTargetToDeformed,
}

/// Chamfer loss between tape points `deformed` (P×3) and fixed `target`
/// points, with unsquared distances. `target_tree` indexes `target`.
pub fn chamfer_loss(
    tape: &mut Tape,
    deformed: Var,
    target: &[Vec3],
    target_tree: &KdTree,
    mode: LossMode,
) -> Result<Var, TensorError> {
    let def_pts = tensor_points(tape.value(deformed));

    let target_to_def = |tape: &mut Tape| -> Result<Var, TensorError> {
        let tree = KdTree::new(&def_pts);
        let idx: Vec<usize> = target.iter().map(|&q| tree.nearest2(q).expect("non-empty").0).collect();
        let picked = tape.gather_rows(deformed, &idx)?;
        let t = tape.constant(Tensor::from_rows(target));
        let diff = tape.sub(picked, t)?;
        let n = tape.row_norms(diff)?;
        tape.mean(n)
    };
    let def_to_target = |tape: &mut Tape| -> Result<Var, TensorError> {
        let nn: Vec<Vec3> = def_pts
            .iter()
            .map(|&p| target[target_tree.nearest2(p).expect("non-empty").0])
            .collect();
        let t = tape.constant(Tensor::from_rows(&nn));
        let diff = tape.sub(deformed, t)?;
        let n = tape.row_norms(diff)?;
        tape.mean(n)
    };

    match mode {
        LossMode::Symmetric => {
            let a = target_to_def(tape)?;
            let b = def_to_target(tape)?;
            let s = tape.add(a, b)?;
            tape.scale(s, 0.5)
        }
        LossMode::OneSidedDeformedToTarget => def_to_target(tape),
        LossMode::OneSidedTargetToDeformed => target_to_def(tape),
    }
}
