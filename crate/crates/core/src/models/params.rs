use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError, Variant};
use crate::tensor::{Dims, Tape, Tensor, Var};

/// Standard deviation of the weight initializer.
pub const INIT_STD: f64 = 0.01;

/// Gate kernels of the gated summarizer, each (1, 1, f_gs, f_gs).
#[derive(Debug, Clone, PartialEq)]
pub struct GsParams {
    pub w_f: Tensor,
    pub u_f: Tensor,
    pub w_i: Tensor,
    pub u_i: Tensor,
    pub w_c: Tensor,
    pub u_c: Tensor,
    pub w_o: Tensor,
    pub u_o: Tensor,
}

/// All trainable tensors of one planner.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// (hidden, 2, 3, 3)
    pub reward_hidden: Tensor,
    /// (1, hidden, 1, 1)
    pub reward_out: Tensor,
    /// (A, 2, f, f), shared by every sweep.
    pub vi_kernel: Tensor,
    /// (8, A, 1, 1), bias-free.
    pub fc: Tensor,
    pub gs: Option<GsParams>,
    /// (1, k, 1, 1)
    pub attention: Option<Tensor>,
}

const GS_NAMES: [&str; 8] = [
    "gs.w_f", "gs.u_f", "gs.w_i", "gs.u_i", "gs.w_c", "gs.u_c", "gs.w_o", "gs.u_o",
];

/// Expected `(name, dims)` layout for a configuration, in canonical order.
pub fn param_layout(cfg: &ModelConfig) -> Vec<(&'static str, Dims)> {
    let a = cfg.actions;
    let (hid, rk, f, g) = (
        cfg.reward_hidden_channels,
        cfg.reward_kernel_size,
        cfg.kernel_size,
        cfg.gs_kernel_size,
    );
    let mut out = vec![
        ("reward.hidden", Dims::new(hid, 2, rk, rk)),
        ("reward.out", Dims::new(1, hid, 1, 1)),
        ("vi.kernel", Dims::new(a, 2, f, f)),
        (
            "head.fc",
            Dims::new(crate::gridworld::Action::COUNT, a, 1, 1),
        ),
    ];
    match cfg.variant {
        Variant::Vin => {}
        Variant::Virn => out.push(("attention.logits", Dims::new(1, cfg.iterations, 1, 1))),
        Variant::GsVin => out.extend(GS_NAMES.iter().map(|&n| (n, Dims::new(1, 1, g, g)))),
    }
    out
}

impl ModelParams {
    /// Every weight drawn i.i.d. from N(0, 0.01^2), in layout order.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("positive std");
        let tensors = param_layout(cfg)
            .into_iter()
            .map(|(name, dims)| {
                let data = (0..dims.len()).map(|_| normal.sample(&mut rng)).collect();
                (
                    name.to_string(),
                    Tensor::from_vec(dims, data).expect("layout dims"),
                )
            })
            .collect();
        Self::from_named(cfg, tensors)
    }

    /// Zero-filled parameters (handy as an accumulator).
    pub fn zeros_like(cfg: &ModelConfig) -> Result<Self, ModelError> {
        let tensors = param_layout(cfg)
            .into_iter()
            .map(|(name, dims)| (name.to_string(), Tensor::zeros(dims)))
            .collect();
        Self::from_named(cfg, tensors)
    }

    /// Rebuilds from `(name, tensor)` pairs; names and shapes must match the
    /// layout exactly (order is free).
    pub fn from_named(
        cfg: &ModelConfig,
        mut tensors: Vec<(String, Tensor)>,
    ) -> Result<Self, ModelError> {
        let layout = param_layout(cfg);
        if tensors.len() != layout.len() {
            return Err(ModelError::Params(format!(
                "expected {} tensors for {}, got {}",
                layout.len(),
                cfg.variant,
                tensors.len()
            )));
        }
        let mut take = |name: &str, dims: Dims| -> Result<Tensor, ModelError> {
            let pos = tensors
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| ModelError::Params(format!("missing tensor {name}")))?;
            let (_, t) = tensors.swap_remove(pos);
            if t.dims() != dims {
                return Err(ModelError::Params(format!(
                    "{name} has shape {}, expected {dims}",
                    t.dims()
                )));
            }
            Ok(t)
        };
        let mut it = layout.iter();
        let mut next = || {
            let &(name, dims) = it.next().expect("layout length");
            take(name, dims)
        };
        let reward_hidden = next()?;
        let reward_out = next()?;
        let vi_kernel = next()?;
        let fc = next()?;
        let (mut gs, mut attention) = (None, None);
        match cfg.variant {
            Variant::Vin => {}
            Variant::Virn => attention = Some(next()?),
            Variant::GsVin => {
                gs = Some(GsParams {
                    w_f: next()?,
                    u_f: next()?,
                    w_i: next()?,
                    u_i: next()?,
                    w_c: next()?,
                    u_c: next()?,
                    w_o: next()?,
                    u_o: next()?,
                })
            }
        }
        Ok(Self {
            reward_hidden,
            reward_out,
            vi_kernel,
            fc,
            gs,
            attention,
        })
    }

    /// Verifies names and shapes against the layout of `cfg`.
    pub fn check(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        let layout = param_layout(cfg);
        let tensors = self.tensors();
        if layout.len() != tensors.len() {
            return Err(ModelError::Params(format!(
                "{} expects {} tensors, found {}",
                cfg.variant,
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, dims), t) in layout.into_iter().zip(tensors) {
            if t.dims() != dims {
                return Err(ModelError::Params(format!(
                    "{name} has shape {}, expected {dims}",
                    t.dims()
                )));
            }
        }
        Ok(())
    }

    /// Tensors in layout order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![
            &self.reward_hidden,
            &self.reward_out,
            &self.vi_kernel,
            &self.fc,
        ];
        if let Some(a) = &self.attention {
            out.push(a);
        }
        if let Some(g) = &self.gs {
            out.extend([
                &g.w_f, &g.u_f, &g.w_i, &g.u_i, &g.w_c, &g.u_c, &g.w_o, &g.u_o,
            ]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![
            &mut self.reward_hidden,
            &mut self.reward_out,
            &mut self.vi_kernel,
            &mut self.fc,
        ];
        if let Some(a) = &mut self.attention {
            out.push(a);
        }
        if let Some(g) = &mut self.gs {
            out.extend([
                &mut g.w_f, &mut g.u_f, &mut g.w_i, &mut g.u_i, &mut g.w_c, &mut g.u_c, &mut g.w_o,
                &mut g.u_o,
            ]);
        }
        out
    }

    /// `(name, tensor)` pairs in layout order.
    pub fn named(&self, cfg: &ModelConfig) -> Vec<(&'static str, &Tensor)> {
        param_layout(cfg)
            .into_iter()
            .map(|(n, _)| n)
            .zip(self.tensors())
            .collect()
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Records the tensors on `tape`, as trainable leaves or as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundParams {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        BoundParams {
            reward_hidden: leaf(&self.reward_hidden),
            reward_out: leaf(&self.reward_out),
            vi_kernel: leaf(&self.vi_kernel),
            fc: leaf(&self.fc),
            attention: self.attention.as_ref().map(&mut leaf),
            gs: self.gs.as_ref().map(|g| BoundGs {
                w_f: leaf(&g.w_f),
                u_f: leaf(&g.u_f),
                w_i: leaf(&g.w_i),
                u_i: leaf(&g.u_i),
                w_c: leaf(&g.w_c),
                u_c: leaf(&g.u_c),
                w_o: leaf(&g.w_o),
                u_o: leaf(&g.u_o),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundGs {
    pub w_f: Var,
    pub u_f: Var,
    pub w_i: Var,
    pub u_i: Var,
    pub w_c: Var,
    pub u_c: Var,
    pub w_o: Var,
    pub u_o: Var,
}

/// [`ModelParams`] recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub reward_hidden: Var,
    pub reward_out: Var,
    pub vi_kernel: Var,
    pub fc: Var,
    pub gs: Option<BoundGs>,
    pub attention: Option<Var>,
}

impl BoundParams {
    /// Vars in layout order, matching [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![self.reward_hidden, self.reward_out, self.vi_kernel, self.fc];
        out.extend(self.attention);
        if let Some(g) = self.gs {
            out.extend([g.w_f, g.u_f, g.w_i, g.u_i, g.w_c, g.u_c, g.w_o, g.u_o]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_follow_variant() {
        let vin = ModelConfig::new(Variant::Vin, 5, 3);
        let virn = ModelConfig::new(Variant::Virn, 5, 3);
        let gs = ModelConfig::new(Variant::GsVin, 5, 3);
        assert_eq!(param_layout(&vin).len(), 4);
        assert_eq!(param_layout(&virn).len(), 5);
        assert_eq!(param_layout(&gs).len(), 12);
        let p = ModelParams::init(&gs, 0).unwrap();
        assert_eq!(p.vi_kernel.len(), gs.vi_param_count());
        let gs_total: usize = p.tensors()[4..].iter().map(|t| t.len()).sum();
        assert_eq!(gs_total, gs.gs_param_count());
        let p = ModelParams::init(&virn, 0).unwrap();
        assert_eq!(p.attention.as_ref().unwrap().dims(), Dims::new(1, 3, 1, 1));
    }

    #[test]
    fn init_statistics() {
        let cfg = ModelConfig::new(Variant::GsVin, 7, 4);
        let p = ModelParams::init(&cfg, 11).unwrap();
        let all: Vec<f64> = p
            .tensors()
            .iter()
            .flat_map(|t| t.data().iter().copied())
            .collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(n > 3000.0);
        assert!(mean.abs() < 4.0 * INIT_STD / n.sqrt(), "mean {mean}");
        assert!(
            (var.sqrt() - INIT_STD).abs() < 0.05 * INIT_STD,
            "std {}",
            var.sqrt()
        );
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::new(Variant::Virn, 3, 2);
        assert_eq!(
            ModelParams::init(&cfg, 5).unwrap(),
            ModelParams::init(&cfg, 5).unwrap()
        );
        assert_ne!(
            ModelParams::init(&cfg, 5).unwrap(),
            ModelParams::init(&cfg, 6).unwrap()
        );
    }

    #[test]
    fn named_round_trip_and_validation() {
        let cfg = ModelConfig::new(Variant::GsVin, 3, 2);
        let p = ModelParams::init(&cfg, 1).unwrap();
        let mut named: Vec<(String, Tensor)> = p
            .named(&cfg)
            .into_iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect();
        named.reverse();
        assert_eq!(ModelParams::from_named(&cfg, named.clone()).unwrap(), p);
        named[0].1 = Tensor::zeros(Dims::new(1, 1, 5, 5));
        assert!(ModelParams::from_named(&cfg, named.clone()).is_err());
        named.pop();
        assert!(ModelParams::from_named(&cfg, named).is_err());
    }

    #[test]
    fn bound_vars_match_tensor_order() {
        let cfg = ModelConfig::new(Variant::GsVin, 3, 2);
        let p = ModelParams::init(&cfg, 1).unwrap();
        let mut tape = Tape::new();
        let b = p.bind(&mut tape, true);
        for (v, t) in b.vars().into_iter().zip(p.tensors()) {
            assert_eq!(tape.value(v), t);
        }
    }
}
