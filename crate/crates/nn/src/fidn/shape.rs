//! Symbolic execution: propagates `[n, c, h, w]` shapes through the
//! architecture, declaring parameters and counting multiply-accumulates
//! without allocating any activation.

use super::arch::Backend;
use crate::kernels::{ConvGeom, Padding};
use crate::params::{Init, ParamSpec};
use crate::{NnError, Result};

#[derive(Clone, Debug, Default)]
pub struct ShapeTracer {
    pub params: Vec<ParamSpec>,
    /// Multiply-accumulates of convolutions and transposed convolutions.
    pub macs: u64,
}

impl ShapeTracer {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, name: String, shape: [usize; 4], init: Init, trainable: bool) {
        self.params.push(ParamSpec {
            name,
            shape,
            init,
            trainable,
        });
    }
}

impl Backend for ShapeTracer {
    type V = [usize; 4];

    fn dims(&self, v: [usize; 4]) -> [usize; 4] {
        v
    }

    fn conv(
        &mut self,
        name: &str,
        x: [usize; 4],
        out_ch: usize,
        kernel: usize,
        stride: usize,
        bias: bool,
    ) -> Result<[usize; 4]> {
        let geom = ConvGeom::new(x, [out_ch, x[1], kernel, kernel], stride, Padding::Same)?;
        let fan_in = x[1] * kernel * kernel;
        self.declare(
            format!("{name}.weight"),
            [out_ch, x[1], kernel, kernel],
            Init::FanInUniform { fan_in },
            true,
        );
        if bias {
            self.declare(format!("{name}.bias"), [1, out_ch, 1, 1], Init::Zeros, true);
        }
        self.macs += (geom.n * geom.o * geom.ho * geom.wo * fan_in) as u64;
        Ok(geom.out_shape())
    }

    fn conv_transpose2(&mut self, name: &str, x: [usize; 4], out_ch: usize) -> Result<[usize; 4]> {
        let [n, c, h, w] = x;
        self.declare(
            format!("{name}.weight"),
            [out_ch, c, 2, 2],
            Init::FanInUniform { fan_in: c },
            true,
        );
        self.declare(format!("{name}.bias"), [1, out_ch, 1, 1], Init::Zeros, true);
        self.macs += (n * out_ch * 4 * h * w * c) as u64;
        Ok([n, out_ch, 2 * h, 2 * w])
    }

    fn batch_norm(&mut self, name: &str, x: [usize; 4]) -> Result<[usize; 4]> {
        let shape = [1, x[1], 1, 1];
        self.declare(format!("{name}.gamma"), shape, Init::Ones, true);
        self.declare(format!("{name}.beta"), shape, Init::Zeros, true);
        self.declare(format!("{name}.running_mean"), shape, Init::Zeros, false);
        self.declare(format!("{name}.running_var"), shape, Init::Ones, false);
        Ok(x)
    }

    fn relu(&mut self, x: [usize; 4]) -> Result<[usize; 4]> {
        Ok(x)
    }

    fn sigmoid(&mut self, x: [usize; 4]) -> Result<[usize; 4]> {
        Ok(x)
    }

    fn avg_pool2(&mut self, x: [usize; 4]) -> Result<[usize; 4]> {
        let [n, c, h, w] = x;
        if h % 2 != 0 || w % 2 != 0 || h == 0 {
            return Err(NnError::shape(
                "avg_pool2",
                format!("needs even spatial dims, got {h}x{w}"),
            ));
        }
        Ok([n, c, h / 2, w / 2])
    }

    fn concat(&mut self, xs: &[[usize; 4]]) -> Result<[usize; 4]> {
        let first = *xs.first().ok_or_else(|| NnError::shape("concat", "no inputs"))?;
        let mut c = 0;
        for x in xs {
            if (x[0], x[2], x[3]) != (first[0], first[2], first[3]) {
                return Err(NnError::shape("concat", format!("{x:?} vs {first:?}")));
            }
            c += x[1];
        }
        Ok([first[0], c, first[2], first[3]])
    }
}
