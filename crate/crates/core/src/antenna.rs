//! Uniform planar arrays, element radiation patterns, steering vectors and
//! beamforming codebooks.
//!
//! Element positions are expressed in wavelengths, so phase terms are
//! `2*pi * d . u` with `u` the unit direction of departure/arrival.
//!
//! Panel frame: `boresight` is the outward normal, `h` the horizontal in-panel
//! axis (along columns) and `v` the vertical in-panel axis (along rows).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::math::{cis, dotu, Vec3};
use crate::{Error, Result};

/// Hard cap on elements per array; larger requests are configuration errors.
pub const MAX_ELEMENTS: usize = 1 << 16;

/// Boresight direction of a panel (global azimuth / zenith, radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub az: f64,
    pub zen: f64,
}

impl Default for Orientation {
    fn default() -> Self {
        Self { az: 0.0, zen: FRAC_PI_2 }
    }
}

impl Orientation {
    pub fn from_degrees(az_deg: f64, zen_deg: f64) -> Self {
        Self {
            az: az_deg.to_radians(),
            zen: zen_deg.to_radians(),
        }
    }

    /// Orientation whose boresight points along `dir`.
    pub fn toward(dir: Vec3) -> Self {
        let (az, zen) = dir.angles();
        Self { az, zen }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows_v: usize,
    pub cols_h: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub orientation: Orientation,
}

impl ArrayGeometry {
    pub fn new(rows_v: usize, cols_h: usize) -> Result<Self> {
        Self::with_spacing(rows_v, cols_h, 0.5)
    }

    pub fn with_spacing(rows_v: usize, cols_h: usize, spacing: f64) -> Result<Self> {
        let geom = Self {
            rows_v,
            cols_h,
            spacing,
            orientation: Orientation::default(),
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn oriented(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows_v == 0 || self.cols_h == 0 {
            return Err(Error::config("array", "rows_v and cols_h must be >= 1"));
        }
        if self.rows_v.saturating_mul(self.cols_h) > MAX_ELEMENTS {
            return Err(Error::config(
                "array",
                format!(
                    "{}x{} exceeds the {MAX_ELEMENTS}-element limit",
                    self.rows_v, self.cols_h
                ),
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::config("array.spacing_wl", "spacing must be > 0"));
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.rows_v * self.cols_h
    }

    /// `(boresight, h, v)` unit vectors of the panel frame.
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let Orientation { az, zen } = self.orientation;
        let b = Vec3::from_angles(az, zen);
        let h = Vec3::new(-az.sin(), az.cos(), 0.0);
        let v = Vec3::new(-zen.cos() * az.cos(), -zen.cos() * az.sin(), zen.sin());
        (b, h, v)
    }

    /// Element `(row, col)` offsets from the panel centre, in wavelengths.
    pub fn element_offsets(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let rc = (self.rows_v as f64 - 1.0) / 2.0;
        let cc = (self.cols_h as f64 - 1.0) / 2.0;
        (0..self.rows_v).flat_map(move |r| {
            (0..self.cols_h).map(move |c| {
                (
                    (r as f64 - rc) * self.spacing,
                    (c as f64 - cc) * self.spacing,
                )
            })
        })
    }

    /// Element positions in the global frame (wavelengths), row-major.
    pub fn element_positions(&self) -> Vec<Vec3> {
        let (_, h, v) = self.frame();
        self.element_offsets()
            .map(|(rv, ch)| h.scale(ch) + v.scale(rv))
            .collect()
    }

    /// Direction cosines of `dir` along the in-panel axes.
    pub fn sine_coords(&self, dir: Vec3) -> (f64, f64) {
        let (_, h, v) = self.frame();
        let d = dir.normalized();
        (d.dot(h), d.dot(v))
    }

    /// Local `(azimuth, zenith)` of `dir` w.r.t. the panel; boresight is
    /// `(0, pi/2)`.
    pub fn local_angles(&self, dir: Vec3) -> (f64, f64) {
        let (b, h, v) = self.frame();
        let d = dir.normalized();
        let (x, y, z) = (d.dot(b), d.dot(h), d.dot(v));
        (y.atan2(x), z.clamp(-1.0, 1.0).acos())
    }

    /// Global direction for local panel angles.
    pub fn local_to_global(&self, az_local: f64, zen_local: f64) -> Vec3 {
        let (b, h, v) = self.frame();
        b.scale(zen_local.sin() * az_local.cos())
            + h.scale(zen_local.sin() * az_local.sin())
            + v.scale(zen_local.cos())
    }

    /// Unnormalized array manifold: entry `m` is `exp(j 2 pi d_m . u)`.
    pub fn manifold(&self, dir: Vec3) -> Vec<Complex64> {
        let (su, sv) = self.sine_coords(dir);
        self.manifold_sine(su, sv)
    }

    /// Manifold for direction cosines `(u, v)` along the panel axes. The
    /// phase separates into a row and a column factor.
    pub fn manifold_sine(&self, su: f64, sv: f64) -> Vec<Complex64> {
        let rc = (self.rows_v as f64 - 1.0) / 2.0;
        let cc = (self.cols_h as f64 - 1.0) / 2.0;
        let col: Vec<Complex64> = (0..self.cols_h)
            .map(|c| cis(TAU * (c as f64 - cc) * self.spacing * su))
            .collect();
        let mut out = Vec::with_capacity(self.n_elements());
        for r in 0..self.rows_v {
            let rp = cis(TAU * (r as f64 - rc) * self.spacing * sv);
            out.extend(col.iter().map(|c| c * rp));
        }
        out
    }
}

/// Element radiation pattern (parabolic-in-dB law clamped by side-lobe and
/// front-to-back limits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementPattern {
    pub max_gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_zen_deg: f64,
    pub sla_db: f64,
    pub a_max_db: f64,
    pub isotropic: bool,
}

impl ElementPattern {
    /// Directional element with 65 degree beamwidths and 8 dBi peak gain.
    pub fn tr38901() -> Self {
        Self {
            max_gain_dbi: 8.0,
            hpbw_az_deg: 65.0,
            hpbw_zen_deg: 65.0,
            sla_db: 30.0,
            a_max_db: 30.0,
            isotropic: false,
        }
    }

    pub fn isotropic() -> Self {
        Self {
            max_gain_dbi: 0.0,
            hpbw_az_deg: 180.0,
            hpbw_zen_deg: 180.0,
            sla_db: 0.0,
            a_max_db: 0.0,
            isotropic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_bw = |b: f64| b > 0.0 && b <= 180.0;
        if !self.max_gain_dbi.is_finite() || !self.sla_db.is_finite() || !self.a_max_db.is_finite() {
            return Err(Error::config("array.pattern", "gains must be finite"));
        }
        if !ok_bw(self.hpbw_az_deg) || !ok_bw(self.hpbw_zen_deg) {
            return Err(Error::config("array.pattern", "HPBW must lie in (0, 180] degrees"));
        }
        Ok(())
    }

    /// Linear field amplitude for local angles.
    pub fn field(&self, az_local: f64, zen_local: f64) -> f64 {
        if self.isotropic {
            1.0
        } else {
            10f64.powf(element_gain_db(self, az_local, zen_local) / 20.0)
        }
    }
}

/// Element gain in dBi at local angles (azimuth from boresight, zenith from
/// the panel's vertical axis).
pub fn element_gain_db(p: &ElementPattern, az: f64, zen: f64) -> f64 {
    if p.isotropic {
        return 0.0;
    }
    let az_deg = crate::math::wrap_pi(az).to_degrees();
    let zen_deg = zen.to_degrees();
    let a_v = -(12.0 * ((zen_deg - 90.0) / p.hpbw_zen_deg).powi(2)).min(p.sla_db);
    let a_h = -(12.0 * (az_deg / p.hpbw_az_deg).powi(2)).min(p.a_max_db);
    -(-(a_v + a_h)).min(p.a_max_db) + p.max_gain_dbi
}

/// Array panel: geometry plus the pattern of every element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antenna {
    pub geometry: ArrayGeometry,
    pub pattern: ElementPattern,
}

impl Antenna {
    pub fn new(geometry: ArrayGeometry, pattern: ElementPattern) -> Self {
        Self { geometry, pattern }
    }

    pub fn isotropic(geometry: ArrayGeometry) -> Self {
        Self::new(geometry, ElementPattern::isotropic())
    }

    pub fn n_elements(&self) -> usize {
        self.geometry.n_elements()
    }

    /// Element field amplitude toward a global direction.
    pub fn field_toward(&self, dir: Vec3) -> f64 {
        if self.pattern.isotropic {
            return 1.0;
        }
        let (az, zen) = self.geometry.local_angles(dir);
        self.pattern.field(az, zen)
    }
}

/// Beamforming weight vector, applied as `w^T h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub weights: Vec<Complex64>,
}

impl Codeword {
    pub fn new(weights: Vec<Complex64>) -> Self {
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::math::norm_sqr(&self.weights).sqrt()
    }

    /// Same codeword with a global phase rotation `e^{j alpha}`.
    pub fn rotated(&self, alpha: f64) -> Codeword {
        let r = cis(alpha);
        Codeword::new(self.weights.iter().map(|w| w * r).collect())
    }

    /// `|w^T a(dir)|` with the unnormalized manifold of `geom`.
    pub fn response(&self, geom: &ArrayGeometry, dir: Vec3) -> f64 {
        dotu(&self.weights, &geom.manifold(dir)).norm()
    }
}

/// Unit-norm steering vector `a(u) / sqrt(N)` toward global angles.
pub fn steering_vector(geom: &ArrayGeometry, az: f64, zen: f64) -> Codeword {
    steering_toward(geom, Vec3::from_angles(az, zen))
}

pub fn steering_toward(geom: &ArrayGeometry, dir: Vec3) -> Codeword {
    let scale = 1.0 / (geom.n_elements() as f64).sqrt();
    Codeword::new(geom.manifold(dir).into_iter().map(|a| a * scale).collect())
}

/// Matched beamformer toward `dir`: the conjugate steering vector, so that
/// `w^T a(dir) = sqrt(N)`.
pub fn beam_toward(geom: &ArrayGeometry, dir: Vec3) -> Codeword {
    let sv = steering_toward(geom, dir);
    Codeword::new(sv.weights.into_iter().map(|a| a.conj()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<Codeword>,
    /// Local azimuths of the grid columns (radians from boresight).
    pub az_grid: Vec<f64>,
    /// Local zeniths of the grid rows.
    pub zen_grid: Vec<f64>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// `(az, zen)` local grid angles of codeword `idx`.
    pub fn grid_point(&self, idx: usize) -> (f64, f64) {
        let n_az = self.az_grid.len();
        (self.az_grid[idx % n_az], self.zen_grid[idx / n_az])
    }
}

/// Beams on a uniform `n_az x n_zen` grid over the panel's front hemisphere.
///
/// Codeword `i_zen * n_az + i_az` points at the cell centre
/// `(-90 + (i_az + 1/2) 180/n_az, (i_zen + 1/2) 180/n_zen)` degrees.
pub fn build_codebook(geom: &ArrayGeometry, n_az: usize, n_zen: usize) -> Result<Codebook> {
    if n_az == 0 || n_zen == 0 {
        return Err(Error::config("codebook", "grid sizes must be >= 1"));
    }
    let az_grid: Vec<f64> = (0..n_az)
        .map(|i| -FRAC_PI_2 + (i as f64 + 0.5) * PI / n_az as f64)
        .collect();
    let zen_grid: Vec<f64> = (0..n_zen)
        .map(|j| (j as f64 + 0.5) * PI / n_zen as f64)
        .collect();
    let mut codewords = Vec::with_capacity(n_az * n_zen);
    for &zen in &zen_grid {
        for &az in &az_grid {
            codewords.push(beam_toward(geom, geom.local_to_global(az, zen)));
        }
    }
    Ok(Codebook {
        codewords,
        az_grid,
        zen_grid,
    })
}

/// Default grid: 2x oversampling per dimension.
pub fn default_codebook(geom: &ArrayGeometry) -> Result<Codebook> {
    build_codebook(geom, 2 * geom.cols_h, 2 * geom.rows_v)
}
