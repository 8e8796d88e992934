use super::prefix::check_sentence;
use super::ProbMatrix;
use crate::{Error, Result};

/// Most probable frame labeling whose segment collapse is `l`.
///
/// Max-product form of the `f` recurrence with a backtrace; among equally
/// probable labelings the one with the latest segment boundaries wins.
pub fn align_frames(l: &[usize], m: &ProbMatrix) -> Result<Vec<usize>> {
    check_sentence(l, m.classes())?;
    let frames = m.frames();
    let segs = l.len();
    if segs > frames {
        return Err(Error::InvalidSentence(format!(
            "{segs} segments do not fit in {frames} frames"
        )));
    }
    let log_y = m.log_data();
    let k = m.classes();
    let y = |t: usize, j: usize| log_y[t * k + l[j]];
    // v[t * segs + j]: best log prob of frames 0..=t ending inside segment j
    let mut v = vec![f64::NEG_INFINITY; frames * segs];
    v[0] = y(0, 0);
    for t in 1..frames {
        for j in 0..segs.min(t + 1) {
            let stay = v[(t - 1) * segs + j];
            let step = if j > 0 {
                v[(t - 1) * segs + j - 1]
            } else {
                f64::NEG_INFINITY
            };
            v[t * segs + j] = y(t, j) + stay.max(step);
        }
    }
    let mut labels = vec![0; frames];
    let mut j = segs - 1;
    for t in (0..frames).rev() {
        labels[t] = l[j];
        if t == 0 {
            break;
        }
        if j > 0 && v[(t - 1) * segs + j - 1] >= v[(t - 1) * segs + j] {
            j -= 1;
        }
    }
    debug_assert_eq!(j, 0);
    Ok(labels)
}
