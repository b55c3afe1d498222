use super::arch::Backend;
use crate::graph::{Graph, Mode, Var};
use crate::kernels::Padding;
use crate::{NnError, ParamStore, Real, Result};

/// Runs the architecture on a [`Graph`], reading parameters from a store.
pub struct GraphBackend<'a, T> {
    pub graph: &'a mut Graph<T>,
    pub params: &'a ParamStore<T>,
    pub mode: Mode,
    pub bn_eps: T,
}

impl<T: Real> GraphBackend<'_, T> {
    fn param(&mut self, name: &str, shape: [usize; 4]) -> Result<Var> {
        let t = self.params.get_shared(name)?;
        if t.shape() != shape {
            return Err(NnError::shape(
                "param",
                format!("`{name}` is {:?}, layer needs {shape:?}", t.shape()),
            ));
        }
        Ok(self.graph.param_shared(name, t.clone()))
    }
}

impl<T: Real> Backend for GraphBackend<'_, T> {
    type V = Var;

    fn dims(&self, v: Var) -> [usize; 4] {
        self.graph.value(v).map(|t| t.shape()).unwrap_or([0; 4])
    }

    fn conv(&mut self, name: &str, x: Var, out_ch: usize, kernel: usize, stride: usize, bias: bool) -> Result<Var> {
        let c = self.graph.value(x)?.shape()[1];
        let w = self.param(&format!("{name}.weight"), [out_ch, c, kernel, kernel])?;
        let b = if bias {
            Some(self.param(&format!("{name}.bias"), [1, out_ch, 1, 1])?)
        } else {
            None
        };
        self.graph.conv2d(x, w, b, stride, Padding::Same)
    }

    fn conv_transpose2(&mut self, name: &str, x: Var, out_ch: usize) -> Result<Var> {
        let c = self.graph.value(x)?.shape()[1];
        let w = self.param(&format!("{name}.weight"), [out_ch, c, 2, 2])?;
        let b = self.param(&format!("{name}.bias"), [1, out_ch, 1, 1])?;
        self.graph.conv_transpose2(x, w, Some(b))
    }

    fn batch_norm(&mut self, name: &str, x: Var) -> Result<Var> {
        let c = self.graph.value(x)?.shape()[1];
        let shape = [1, c, 1, 1];
        let gamma = self.param(&format!("{name}.gamma"), shape)?;
        let beta = self.param(&format!("{name}.beta"), shape)?;
        let params = self.params;
        let rm = params.get(&format!("{name}.running_mean"))?.data();
        let rv = params.get(&format!("{name}.running_var"))?.data();
        self.graph
            .batch_norm(name, x, gamma, beta, rm, rv, self.mode, self.bn_eps)
    }

    fn relu(&mut self, x: Var) -> Result<Var> {
        self.graph.relu(x)
    }

    fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.graph.sigmoid(x)
    }

    fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        self.graph.avg_pool2(x)
    }

    fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        self.graph.concat(xs)
    }
}
