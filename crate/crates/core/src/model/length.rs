/// Remaining-length countdown: `l_1 = desired`, `l_{t+1} = max(l_t - 1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthSchedule {
    initial: usize,
    step: usize,
    max_index: usize,
}

impl LengthSchedule {
    /// `max_index` is the last row of the embedding table; larger remaining
    /// lengths are clamped to it on lookup.
    pub fn new(initial: usize, max_index: usize) -> Self {
        LengthSchedule {
            initial,
            step: 0,
            max_index,
        }
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn remaining(&self) -> usize {
        self.initial.saturating_sub(self.step)
    }

    /// Embedding table row for the current step.
    pub fn index(&self) -> usize {
        self.remaining().min(self.max_index)
    }

    pub fn advance(&mut self) {
        self.step += 1;
    }
}

impl Iterator for LengthSchedule {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let idx = self.index();
        self.advance();
        Some(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_down_to_zero() {
        let seq: Vec<usize> = LengthSchedule::new(3, 50).take(6).collect();
        assert_eq!(seq, [3, 2, 1, 0, 0, 0]);
        let seq: Vec<usize> = LengthSchedule::new(0, 50).take(4).collect();
        assert_eq!(seq, [0, 0, 0, 0]);
    }

    #[test]
    fn clamps_to_table() {
        let seq: Vec<usize> = LengthSchedule::new(7, 4).take(5).collect();
        assert_eq!(seq, [4, 4, 4, 4, 3]);
    }
}
