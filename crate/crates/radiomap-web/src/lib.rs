//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: a knife-edge diffraction sweep, a
//! coverage heatmap over a procedural scene and relay placement between two
//! ground users. The computations live in [`core`] so they can be tested
//! natively; the `#[wasm_bindgen]` items only convert errors.

pub mod core;

use radiomap::Point3;
use wasm_bindgen::prelude::*;

fn js(e: radiomap::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Excess loss in dB of `edges` equal knife edges, each bending the path by
/// `θ`, for `samples` angles evenly spread over `[theta_min, theta_max]`.
#[wasm_bindgen]
pub fn diffraction_sweep(
    edges: usize,
    spacing: f64,
    wavelength: f64,
    theta_min: f64,
    theta_max: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    core::diffraction_sweep(edges, spacing, wavelength, theta_min, theta_max, samples).map_err(js)
}

/// A procedural scene with the default propagation model on top.
#[wasm_bindgen]
pub struct Scene(core::Scene);

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, size: usize, cell_size: f64, density: f64, max_height: f64) -> Result<Scene, JsError> {
        core::Scene::generate(seed, size, cell_size, density, max_height).map(Scene).map_err(js)
    }

    pub fn rows(&self) -> usize {
        self.0.grid().rows
    }

    pub fn cols(&self) -> usize {
        self.0.grid().cols
    }

    #[wasm_bindgen(js_name = cellSize)]
    pub fn cell_size(&self) -> f64 {
        self.0.grid().cell_size
    }

    /// Obstacle heights, row-major.
    pub fn heights(&self) -> Vec<f64> {
        self.0.heights()
    }

    /// Predicted attenuation in dB from a TX at `(x, y, z)` to a receiver
    /// at `rx_height` over every cell centre, row-major. The cell directly
    /// under the TX is `NaN`.
    pub fn heatmap(&self, x: f64, y: f64, z: f64, rx_height: f64) -> Result<Vec<f64>, JsError> {
        self.0.heatmap(Point3::new(x, y, z), rx_height).map_err(js)
    }

    /// Relay for users at ground points `(x1, y1)` and `(x2, y2)` and height
    /// `user_height`, as `[x, y, z, worst_db, search_distance, exhaustive_db,
    /// exhaustive_distance]`.
    pub fn relay(&self, x1: f64, y1: f64, x2: f64, y2: f64, user_height: f64, z_max: f64) -> Result<Vec<f64>, JsError> {
        let p1 = Point3::new(x1, y1, user_height);
        let p2 = Point3::new(x2, y2, user_height);
        self.0.relay(p1, p2, z_max).map(|r| r.to_vec()).map_err(js)
    }
}
