use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

fn check_frame(op: &'static str, frame: &Tensor, like: Option<&Tensor>) -> Result<()> {
    let s = frame.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape(op, format!("frames must be [1, H, W], got {s:?}")));
    }
    if let Some(o) = like {
        if o.shape() != s {
            return Err(Error::shape(op, format!("frame {s:?} differs from {:?}", o.shape())));
        }
    }
    if frame.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(format!("{op}: pixel values must lie in [0, 1]")));
    }
    Ok(())
}

fn concat<'a>(frames: impl Iterator<Item = &'a Tensor>, n: usize, h: usize, w: usize) -> Tensor {
    let mut data = Vec::with_capacity(n * h * w);
    for f in frames {
        data.extend_from_slice(f.data());
    }
    Tensor::from_parts(vec![n, h, w], data)
}

/// Stacks `raw` after the previous frames in `stack` (oldest first) into
/// `[n_stack, H, W]`, newest last. Missing history is filled with copies of
/// the oldest available frame.
pub fn preprocess(raw: &Tensor, stack: &[Tensor], n_stack: usize) -> Result<Tensor> {
    if n_stack == 0 {
        return Err(Error::invalid("n_stack must be at least 1"));
    }
    check_frame("preprocess", raw, None)?;
    for f in stack {
        check_frame("preprocess", f, Some(raw))?;
    }
    let history = &stack[stack.len().saturating_sub(n_stack - 1)..];
    let oldest = history.first().unwrap_or(raw);
    let pad = n_stack - 1 - history.len();
    let (h, w) = (raw.shape()[1], raw.shape()[2]);
    Ok(concat(
        std::iter::repeat_n(oldest, pad)
            .chain(history)
            .chain(std::iter::once(raw)),
        n_stack,
        h,
        w,
    ))
}

/// Stacked observation whose frames are shared with neighbouring observations.
#[derive(Clone, Debug)]
pub struct StackedFrames {
    frames: Vec<Arc<Tensor>>,
}

impl StackedFrames {
    /// Wraps an already stacked `[C, H, W]` tensor.
    pub fn whole(t: Tensor) -> Self {
        Self {
            frames: vec![Arc::new(t)],
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        if let [only] = self.frames.as_slice() {
            return only.as_ref().clone();
        }
        let s = self.frames[0].shape();
        let (h, w) = (s[1], s[2]);
        let c = self.frames.iter().map(|f| f.shape()[0]).sum();
        concat(self.frames.iter().map(|f| f.as_ref()), c, h, w)
    }
}

/// Sliding window of the last `n_stack` frames of an episode.
#[derive(Clone, Debug)]
pub struct FrameStack {
    n_stack: usize,
    frames: VecDeque<Arc<Tensor>>,
}

impl FrameStack {
    pub fn new(n_stack: usize) -> Result<Self> {
        if n_stack == 0 {
            return Err(Error::invalid("n_stack must be at least 1"));
        }
        Ok(Self {
            n_stack,
            frames: VecDeque::with_capacity(n_stack),
        })
    }

    pub fn n_stack(&self) -> usize {
        self.n_stack
    }

    /// Starts an episode: every slot holds `frame`.
    pub fn reset(&mut self, frame: Tensor) -> Result<StackedFrames> {
        check_frame("FrameStack::reset", &frame, None)?;
        let f = Arc::new(frame);
        self.frames.clear();
        self.frames.extend(std::iter::repeat_n(f, self.n_stack));
        Ok(self.stacked())
    }

    /// Drops the oldest frame and appends `frame`.
    pub fn push(&mut self, frame: Tensor) -> Result<StackedFrames> {
        let first = self
            .frames
            .front()
            .ok_or_else(|| Error::invalid("FrameStack::push before reset"))?;
        check_frame("FrameStack::push", &frame, Some(first))?;
        self.frames.pop_front();
        self.frames.push_back(Arc::new(frame));
        Ok(self.stacked())
    }

    pub fn stacked(&self) -> StackedFrames {
        StackedFrames {
            frames: self.frames.iter().cloned().collect(),
        }
    }

    pub fn observation(&self) -> Tensor {
        self.stacked().to_tensor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(v: f64) -> Tensor {
        Tensor::full(&[1, 2, 3], v)
    }

    fn channels(t: &Tensor) -> Vec<f64> {
        t.data().chunks(6).map(|c| c[0]).collect()
    }

    #[test]
    fn pure_stacking_rules() {
        let f = [frame(0.1), frame(0.2), frame(0.3), frame(0.4), frame(0.5)];
        assert_eq!(channels(&preprocess(&f[0], &[], 4).unwrap()), [0.1; 4]);
        assert_eq!(channels(&preprocess(&f[3], &f[..3], 4).unwrap()), [0.1, 0.2, 0.3, 0.4]);
        assert_eq!(channels(&preprocess(&f[4], &f[..4], 4).unwrap()), [0.2, 0.3, 0.4, 0.5]);
        assert_eq!(channels(&preprocess(&f[2], &f[1..2], 4).unwrap()), [0.2, 0.2, 0.2, 0.3]);
        assert!(preprocess(&f[0], &[Tensor::full(&[1, 3, 3], 0.0)], 4).is_err());
        assert!(preprocess(&Tensor::full(&[1, 2, 3], 2.0), &[], 4).is_err());
    }

    #[test]
    fn frame_stack_matches_pure_function() {
        let f: Vec<Tensor> = (1..=6).map(|i| frame(i as f64 / 10.0)).collect();
        let mut fs = FrameStack::new(4).unwrap();
        let mut obs = fs.reset(f[0].clone()).unwrap().to_tensor();
        assert_eq!(obs, preprocess(&f[0], &[], 4).unwrap());
        for i in 1..f.len() {
            obs = fs.push(f[i].clone()).unwrap().to_tensor();
            assert_eq!(obs, preprocess(&f[i], &f[..i], 4).unwrap());
        }
        assert_eq!(channels(&obs), [0.3, 0.4, 0.5, 0.6]);
        assert!(FrameStack::new(4).unwrap().push(frame(0.0)).is_err());
    }
}
