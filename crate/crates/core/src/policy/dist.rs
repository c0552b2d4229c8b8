//! Categorical distributions over logits, with closed-form logit gradients.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub logits: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Categorical {
    pub fn new(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let log_probs: Vec<f64> = logits.iter().map(|l| l - lse).collect();
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Categorical {
            logits: logits.to_vec(),
            log_probs,
            probs,
        }
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn log_prob(&self, a: usize) -> f64 {
        self.log_probs[a]
    }

    pub fn entropy(&self) -> f64 {
        -self.probs.iter().zip(&self.log_probs).map(|(p, l)| p * l).sum::<f64>()
    }

    /// Most likely category; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.logits.iter().enumerate() {
            if l > self.logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }

    /// Adds `scale · ∂ log p(a) / ∂ logits` into `out`.
    pub fn add_log_prob_grad(&self, a: usize, scale: f64, out: &mut [f64]) {
        for (k, (o, p)) in out.iter_mut().zip(&self.probs).enumerate() {
            let ind = if k == a { 1.0 } else { 0.0 };
            *o += scale * (ind - p);
        }
    }

    /// Adds `scale · ∂ H / ∂ logits` into `out`.
    pub fn add_entropy_grad(&self, scale: f64, out: &mut [f64]) {
        let h = self.entropy();
        for (o, (p, l)) in out.iter_mut().zip(self.probs.iter().zip(&self.log_probs)) {
            *o += scale * (-p * (l + h));
        }
    }
}

/// Independent categorical heads laid out back to back in one logit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCategorical {
    pub heads: Vec<Categorical>,
}

impl MultiCategorical {
    pub fn new(logits: &[f64], sizes: &[usize]) -> Self {
        let mut off = 0;
        let heads = sizes
            .iter()
            .map(|&n| {
                let c = Categorical::new(&logits[off..off + n]);
                off += n;
                c
            })
            .collect();
        MultiCategorical { heads }
    }

    pub fn log_prob(&self, actions: &[usize]) -> f64 {
        self.heads.iter().zip(actions).map(|(h, &a)| h.log_prob(a)).sum()
    }

    pub fn entropy(&self) -> f64 {
        self.heads.iter().map(Categorical::entropy).sum()
    }

    pub fn argmax(&self) -> Vec<usize> {
        self.heads.iter().map(Categorical::argmax).collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        self.heads.iter().map(|h| h.sample(rng)).collect()
    }

    /// Gradient of `coef_lp · log p(actions) + coef_ent · H` w.r.t. the logits.
    pub fn logit_grad(&self, actions: &[usize], coef_lp: f64, coef_ent: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.heads.iter().map(Categorical::len).sum());
        for (h, &a) in self.heads.iter().zip(actions) {
            let mut g = vec![0.0; h.len()];
            h.add_log_prob_grad(a, coef_lp, &mut g);
            h.add_entropy_grad(coef_ent, &mut g);
            out.extend(g);
        }
        out
    }
}
