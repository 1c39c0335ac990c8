//! Feed-forward regressor with one input adapter per feature layout and a
//! shared trunk. Parameters live in one flat vector so that updates,
//! accumulation and finite-difference checks operate on plain slices.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
struct LayerShape {
    input: usize,
    output: usize,
    w_offset: usize,
    b_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    layers: Vec<LayerShape>,
    /// Layer indices traversed for each input path.
    paths: Vec<Vec<usize>>,
    params: Vec<f64>,
}

impl Regressor {
    /// Zero-initialised regressor. Each entry of `input_widths` gets its own
    /// first layer (`input -> hidden[0]`); the remaining layers down to the
    /// scalar output are shared. With no hidden layers every path is a
    /// separate linear map.
    pub fn zeros(input_widths: &[usize], hidden: &[usize]) -> Self {
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut push = |input: usize, output: usize, layers: &mut Vec<LayerShape>| {
            let w_offset = offset;
            let b_offset = w_offset + input * output;
            offset = b_offset + output;
            layers.push(LayerShape {
                input,
                output,
                w_offset,
                b_offset,
            });
            layers.len() - 1
        };
        let first_out = hidden.first().copied().unwrap_or(1);
        let adapters: Vec<usize> = input_widths
            .iter()
            .map(|&w| push(w, first_out, &mut layers))
            .collect();
        let mut trunk = Vec::new();
        for pair in hidden.windows(2) {
            trunk.push(push(pair[0], pair[1], &mut layers));
        }
        if let Some(&last) = hidden.last() {
            trunk.push(push(last, 1, &mut layers));
        }
        let paths = adapters
            .into_iter()
            .map(|a| std::iter::once(a).chain(trunk.iter().copied()).collect())
            .collect();
        Regressor {
            layers,
            paths,
            params: vec![0.0; offset],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init_uniform(&mut self, rng: &mut impl Rng) {
        for layer in &self.layers {
            let bound = 1.0 / (layer.input as f64).sqrt();
            for p in &mut self.params[layer.w_offset..layer.b_offset + layer.output] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn input_width(&self, path: usize) -> usize {
        self.layers[self.paths[path][0]].input
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Bias of the final (scalar) layer.
    pub fn output_bias_index(&self) -> usize {
        let last = *self.paths[0].last().expect("path has layers");
        self.layers[last].b_offset
    }

    fn apply_layer(&self, layer: &LayerShape, input: &[f64], out: &mut Vec<f64>, tanh: bool) {
        out.clear();
        let w = &self.params[layer.w_offset..layer.b_offset];
        let b = &self.params[layer.b_offset..layer.b_offset + layer.output];
        for o in 0..layer.output {
            let row = &w[o * layer.input..(o + 1) * layer.input];
            let z = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + b[o];
            out.push(if tanh { z.tanh() } else { z });
        }
    }

    pub fn forward(&self, path: usize, input: &[f64]) -> f64 {
        let mut cache = Vec::new();
        self.forward_cached(path, input, &mut cache)
    }

    /// Forward pass keeping each layer's output in `cache` for
    /// [`Regressor::backward`].
    pub fn forward_cached(&self, path: usize, input: &[f64], cache: &mut Vec<Vec<f64>>) -> f64 {
        let route = &self.paths[path];
        debug_assert_eq!(input.len(), self.layers[route[0]].input);
        cache.resize_with(route.len(), Vec::new);
        for (k, &li) in route.iter().enumerate() {
            let last = k + 1 == route.len();
            let (before, rest) = cache.split_at_mut(k);
            let src = if k == 0 { input } else { before[k - 1].as_slice() };
            self.apply_layer(&self.layers[li], src, &mut rest[0], !last);
        }
        cache[route.len() - 1][0]
    }

    /// Adds `d_output * d(output)/d(params)` into `grad`, using the
    /// activations left by the matching `forward_cached` call.
    pub fn backward(&self, path: usize, input: &[f64], cache: &[Vec<f64>], d_output: f64, grad: &mut [f64]) {
        let route = &self.paths[path];
        let mut delta = vec![d_output];
        for k in (0..route.len()).rev() {
            let layer = &self.layers[route[k]];
            let layer_in = if k == 0 { input } else { cache[k - 1].as_slice() };
            for (o, &d) in delta.iter().enumerate() {
                let g = &mut grad[layer.w_offset + o * layer.input..layer.w_offset + (o + 1) * layer.input];
                for (gi, &xi) in g.iter_mut().zip(layer_in) {
                    *gi += d * xi;
                }
                grad[layer.b_offset + o] += d;
            }
            if k > 0 {
                let w = &self.params[layer.w_offset..layer.b_offset];
                let mut prev = vec![0.0; layer.input];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &w[o * layer.input..(o + 1) * layer.input];
                    for (p, &wi) in prev.iter_mut().zip(row) {
                        *p += wi * d;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(layer_in) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}
