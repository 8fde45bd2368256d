use super::ExtractError;
use crate::model::SolutionWindow;

/// Partition `solution_steps` into windows from the tail.
///
/// The last window covers the final `w` steps, each preceding window the
/// `w` steps before it; when the step count is not divisible by `w` the
/// first window holds the remainder. Windows come back in front-to-back
/// order, so concatenating them reproduces the solution exactly.
pub fn partition_windows(
    solution_steps: &[String],
    w: usize,
) -> Result<Vec<SolutionWindow>, ExtractError> {
    if w == 0 {
        return Err(ExtractError::BadWindowLength);
    }
    let m = solution_steps.len();
    if m == 0 {
        return Err(ExtractError::EmptySolution);
    }
    let k = m.div_ceil(w);
    let first = m - (k - 1) * w;
    let mut windows = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = if i == 0 { first } else { w };
        windows.push(SolutionWindow {
            steps: solution_steps[start..start + size].to_vec(),
            tail_offset: k - 1 - i,
        });
        start += size;
    }
    Ok(windows)
}
