/// Patience-based early stopping on a score that should increase.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    best: Option<f64>,
    best_step: usize,
    steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper { patience, best: None, best_step: 0, steps: 0 }
    }

    /// Record the score of the next step. Only a strict increase counts as an
    /// improvement; NaN never does.
    pub fn observe(&mut self, score: f64) -> StopDecision {
        self.steps += 1;
        if self.best.map_or(!score.is_nan(), |b| score > b) {
            self.best = Some(score);
            self.best_step = self.steps;
            return StopDecision::Improved;
        }
        if self.steps - self.best_step >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// 1-based step of the best score, 0 before any improvement.
    pub fn best_step(&self) -> usize {
        self.best_step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Number of steps a stopper runs on a fixed trace before halting (or the trace length).
pub fn steps_until_stop(trace: &[f64], patience: usize) -> usize {
    let mut s = EarlyStopper::new(patience);
    for &x in trace {
        if s.observe(x) == StopDecision::Stop {
            break;
        }
    }
    s.steps()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halts_after_patience_non_improving_steps() {
        // improvement at step 3, then flat
        let trace = [0.5, 0.6, 0.7, 0.7, 0.69, 0.7, 0.65];
        assert_eq!(steps_until_stop(&trace, 2), 5);
        let mut s = EarlyStopper::new(2);
        for x in &trace[..5] {
            s.observe(*x);
        }
        assert_eq!((s.best(), s.best_step()), (Some(0.7), 3));
    }

    #[test]
    fn forty_round_patience() {
        let mut trace = vec![0.6, 0.8];
        trace.extend(std::iter::repeat_n(0.79, 100));
        assert_eq!(steps_until_stop(&trace, 40), 42);
        let mut late = trace.clone();
        late[30] = 0.9;
        assert_eq!(steps_until_stop(&late, 40), 71);
    }

    #[test]
    fn runs_whole_trace_while_improving() {
        let trace: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(steps_until_stop(&trace, 2), 10);
    }
}
