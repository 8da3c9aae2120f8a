/// Exponential moving average of the validation loss driving early stopping.
///
/// The first observation seeds the average. Every later observation first
/// compares against the current average (stop when strictly greater) and then
/// folds in: `ema ← β·ema + (1−β)·loss`. With `β = 0` the comparison is
/// against the previous loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationTracker {
    beta: f64,
    ema: f64,
    initialized: bool,
}

impl ValidationTracker {
    /// `beta` is clamped into `[0, 1)`.
    pub fn new(beta: f64) -> Self {
        ValidationTracker {
            beta: beta.clamp(0.0, 1.0 - f64::EPSILON),
            ema: f64::NAN,
            initialized: false,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ema(&self) -> Option<f64> {
        self.initialized.then_some(self.ema)
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Records a validation loss and reports whether training should stop.
    /// A non-finite loss always stops and leaves the average untouched.
    pub fn should_stop(&mut self, loss: f64) -> bool {
        if !loss.is_finite() {
            return true;
        }
        if !self.initialized {
            self.ema = loss;
            self.initialized = true;
            return false;
        }
        let stop = loss > self.ema;
        self.ema = self.beta * self.ema + (1.0 - self.beta) * loss;
        stop
    }

    /// Forget the average; called whenever new data arrives.
    pub fn reset(&mut self) {
        self.initialized = false;
        self.ema = f64::NAN;
    }
}

/// Value-style form of [`ValidationTracker::should_stop`].
pub fn should_stop(tracker: &ValidationTracker, new_val_loss: f64) -> (bool, ValidationTracker) {
    let mut next = tracker.clone();
    let stop = next.should_stop(new_val_loss);
    (stop, next)
}

pub fn reset_tracker_on_new_data(tracker: &ValidationTracker) -> ValidationTracker {
    let mut next = tracker.clone();
    next.reset();
    next
}
