//! CIELAB conversion and the CIEDE2000 color difference.

/// D65 reference white, `Y = 1`.
pub const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;
const POW25_7: f64 = 6_103_515_625.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

/// sRGB electro-optical transfer function.
#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_srgb_to_xyz([r, g, b]: [f64; 3]) -> [f64; 3] {
    [
        0.4124564 * r + 0.3575761 * g + 0.1804375 * b,
        0.2126729 * r + 0.7151522 * g + 0.0721750 * b,
        0.0193339 * r + 0.1191920 * g + 0.9503041 * b,
    ]
}

pub fn xyz_to_lab(xyz: [f64; 3]) -> Lab {
    let f = |t: f64| {
        if t > LAB_EPSILON {
            t.cbrt()
        } else {
            (LAB_KAPPA * t + 16.0) / 116.0
        }
    };
    let [fx, fy, fz] = [0, 1, 2].map(|i| f(xyz[i] / D65_WHITE[i]));
    Lab::new(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

/// Display-referred sRGB in `[0, 1]` to CIELAB under D65.
pub fn srgb_to_lab(rgb: [f64; 3]) -> Lab {
    xyz_to_lab(linear_srgb_to_xyz(rgb.map(srgb_to_linear)))
}

/// Intermediate and final quantities of one CIEDE2000 evaluation.
/// Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ciede2000 {
    pub g: f64,
    pub a1_prime: f64,
    pub a2_prime: f64,
    pub c1_prime: f64,
    pub c2_prime: f64,
    pub h1_prime: f64,
    pub h2_prime: f64,
    pub mean_h_prime: f64,
    pub delta_l_prime: f64,
    pub delta_c_prime: f64,
    /// Signed hue difference `dH' = 2 sqrt(C1' C2') sin(dh' / 2)`.
    pub delta_h_prime: f64,
    pub t: f64,
    pub s_l: f64,
    pub s_c: f64,
    pub s_h: f64,
    pub r_t: f64,
    pub delta_e: f64,
}

fn hue_angle(b: f64, a_prime: f64) -> f64 {
    if b == 0.0 && a_prime == 0.0 {
        0.0
    } else {
        let h = b.atan2(a_prime).to_degrees();
        if h < 0.0 {
            h + 360.0
        } else {
            h
        }
    }
}

/// CIEDE2000 with unit parametric factors `kL = kC = kH = 1`.
pub fn ciede2000(lab1: Lab, lab2: Lab) -> Ciede2000 {
    let c1 = lab1.a.hypot(lab1.b);
    let c2 = lab2.a.hypot(lab2.b);
    let c_bar7 = ((c1 + c2) / 2.0).powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + POW25_7)).sqrt());
    let a1_prime = (1.0 + g) * lab1.a;
    let a2_prime = (1.0 + g) * lab2.a;
    let c1_prime = a1_prime.hypot(lab1.b);
    let c2_prime = a2_prime.hypot(lab2.b);
    let h1_prime = hue_angle(lab1.b, a1_prime);
    let h2_prime = hue_angle(lab2.b, a2_prime);

    let chroma_product = c1_prime * c2_prime;
    let dh = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2_prime - h1_prime;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let delta_l_prime = lab2.l - lab1.l;
    let delta_c_prime = c2_prime - c1_prime;
    let delta_h_prime = 2.0 * chroma_product.sqrt() * (dh.to_radians() / 2.0).sin();

    let mean_l = (lab1.l + lab2.l) / 2.0;
    let mean_c = (c1_prime + c2_prime) / 2.0;
    let mean_h_prime = if chroma_product == 0.0 {
        h1_prime + h2_prime
    } else if (h1_prime - h2_prime).abs() <= 180.0 {
        (h1_prime + h2_prime) / 2.0
    } else if h1_prime + h2_prime < 360.0 {
        (h1_prime + h2_prime + 360.0) / 2.0
    } else {
        (h1_prime + h2_prime - 360.0) / 2.0
    };

    let cos_deg = |deg: f64| deg.to_radians().cos();
    let t = 1.0 - 0.17 * cos_deg(mean_h_prime - 30.0)
        + 0.24 * cos_deg(2.0 * mean_h_prime)
        + 0.32 * cos_deg(3.0 * mean_h_prime + 6.0)
        - 0.20 * cos_deg(4.0 * mean_h_prime - 63.0);
    let delta_theta = 30.0 * (-((mean_h_prime - 275.0) / 25.0).powi(2)).exp();
    let mean_c7 = mean_c.powi(7);
    let r_c = 2.0 * (mean_c7 / (mean_c7 + POW25_7)).sqrt();
    let l50 = (mean_l - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * mean_c;
    let s_h = 1.0 + 0.015 * mean_c * t;
    let r_t = -(2.0 * delta_theta).to_radians().sin() * r_c;

    let (dl, dc, dhh) = (delta_l_prime / s_l, delta_c_prime / s_c, delta_h_prime / s_h);
    let delta_e = (dl * dl + dc * dc + dhh * dhh + r_t * dc * dhh).max(0.0).sqrt();

    Ciede2000 {
        g,
        a1_prime,
        a2_prime,
        c1_prime,
        c2_prime,
        h1_prime,
        h2_prime,
        mean_h_prime,
        delta_l_prime,
        delta_c_prime,
        delta_h_prime,
        t,
        s_l,
        s_c,
        s_h,
        r_t,
        delta_e,
    }
}

pub fn delta_e_2000(lab1: Lab, lab2: Lab) -> f64 {
    ciede2000(lab1, lab2).delta_e
}
