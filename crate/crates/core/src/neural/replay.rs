use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;

/// A sampled mini-batch; states and actions are `dim x batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub s: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub r: Vec<f64>,
    pub s2: DMatrix<f64>,
    pub done: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// FIFO ring buffer of `(s, a, r, s', done)` transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    s_dim: usize,
    a_dim: usize,
    s: Vec<f64>,
    a: Vec<f64>,
    r: Vec<f64>,
    s2: Vec<f64>,
    done: Vec<f64>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, s_dim: usize, a_dim: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            s_dim,
            a_dim,
            s: Vec::new(),
            a: Vec::new(),
            r: Vec::new(),
            s2: Vec::new(),
            done: Vec::new(),
            len: 0,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, s: &[f64], a: &[f64], r: f64, s2: &[f64], done: bool) {
        assert_eq!(s.len(), self.s_dim);
        assert_eq!(s2.len(), self.s_dim);
        assert_eq!(a.len(), self.a_dim);
        let d = if done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.s.extend_from_slice(s);
            self.a.extend_from_slice(a);
            self.s2.extend_from_slice(s2);
            self.r.push(r);
            self.done.push(d);
            self.len += 1;
        } else {
            let i = self.head;
            self.s[i * self.s_dim..(i + 1) * self.s_dim].copy_from_slice(s);
            self.a[i * self.a_dim..(i + 1) * self.a_dim].copy_from_slice(a);
            self.s2[i * self.s_dim..(i + 1) * self.s_dim].copy_from_slice(s2);
            self.r[i] = r;
            self.done[i] = d;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    /// Transition at storage slot `i`, returned as `(s, a, r, s2, done)`.
    pub fn get(&self, i: usize) -> (&[f64], &[f64], f64, &[f64], bool) {
        (
            &self.s[i * self.s_dim..(i + 1) * self.s_dim],
            &self.a[i * self.a_dim..(i + 1) * self.a_dim],
            self.r[i],
            &self.s2[i * self.s_dim..(i + 1) * self.s_dim],
            self.done[i] != 0.0,
        )
    }

    /// Oldest transition still stored.
    pub fn oldest(&self) -> Option<(&[f64], &[f64], f64, &[f64], bool)> {
        if self.len == 0 {
            None
        } else if self.len < self.capacity {
            Some(self.get(0))
        } else {
            Some(self.get(self.head))
        }
    }

    /// Uniform batch without replacement; `None` if fewer than `n` stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Batch> {
        if n == 0 || n > self.len {
            return None;
        }
        let idx = index::sample(rng, self.len, n);
        let mut s = DMatrix::zeros(self.s_dim, n);
        let mut a = DMatrix::zeros(self.a_dim, n);
        let mut s2 = DMatrix::zeros(self.s_dim, n);
        let mut r = Vec::with_capacity(n);
        let mut done = Vec::with_capacity(n);
        for (c, i) in idx.iter().enumerate() {
            s.column_mut(c)
                .copy_from_slice(&self.s[i * self.s_dim..(i + 1) * self.s_dim]);
            a.column_mut(c)
                .copy_from_slice(&self.a[i * self.a_dim..(i + 1) * self.a_dim]);
            s2.column_mut(c)
                .copy_from_slice(&self.s2[i * self.s_dim..(i + 1) * self.s_dim]);
            r.push(self.r[i]);
            done.push(self.done[i]);
        }
        Some(Batch { s, a, r, s2, done })
    }
}
