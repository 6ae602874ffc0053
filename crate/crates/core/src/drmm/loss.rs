/// Pairwise hinge loss `max(0, 1 - (s_pos - s_neg))`.
///
/// The margin is formed first so that the loss is zero exactly when the
/// computed margin is at least 1.
pub fn hinge_loss(s_pos: f64, s_neg: f64) -> f64 {
    (1.0 - (s_pos - s_neg)).max(0.0)
}
