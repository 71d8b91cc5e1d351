// scratch probe: geometry oracle refinement ratios (criterion-2 prototype)
use surface_flow::geometry::{
    build_geometry, christoffel_symbols, connection_coefficients, SurfaceGrid,
};
use surface_flow::grid::{GridDims, GridSteps};
use surface_flow::surfaces::{make_surface, AnalyticSurfaceSpec, GridSpec, SurfaceKind};

type V3 = [f64; 3];
type M2 = [[f64; 2]; 2];

fn dot(a: &V3, b: &V3) -> f64 { a[0]*b[0] + a[1]*b[1] + a[2]*b[2] }

/// test-local torus embedding (duplicates the builtin formula as oracle data)
fn torus_f(tau: f64, th: f64, ph: f64) -> V3 {
    let r = 1.0 + 0.2 * tau * (8.0 * th).sin();
    [(2.0 + tau + r * ph.cos()) * th.cos(), (2.0 + r * ph.cos()) * th.sin(), r * ph.sin()]
}

fn sphere_f(_tau: f64, th: f64, ph: f64) -> V3 {
    [ph.sin() * th.cos(), ph.sin() * th.sin(), ph.cos()]
}

/// metric from tiny central differences of the embedding, in chart units
/// scaled by (st, s1, s2) = d(natural)/d(grid coordinate)
fn oracle_metric(f: &dyn Fn(f64, f64, f64) -> V3, s: [f64; 3], x: [f64; 3]) -> M2 {
    let df = 1e-5;
    let d = |axis: usize| -> V3 {
        let mut lo = x; let mut hi = x;
        lo[axis] -= df; hi[axis] += df;
        let (a, b) = (f(lo[0], lo[1], lo[2]), f(hi[0], hi[1], hi[2]));
        [ (b[0]-a[0])/(2.0*df) * s[axis], (b[1]-a[1])/(2.0*df) * s[axis], (b[2]-a[2])/(2.0*df) * s[axis] ]
    };
    let d1 = d(1); let d2 = d(2);
    [[dot(&d1,&d1), dot(&d1,&d2)],[dot(&d2,&d1), dot(&d2,&d2)]]
}

fn frame_of(g: &M2) -> M2 {
    let det = g[0][0]*g[1][1] - g[0][1]*g[1][0];
    let a11 = 1.0 / g[0][0].sqrt();
    let a22 = (g[0][0]/det).sqrt();
    let a12 = -g[0][1]*a22/g[0][0];
    [[a11, 0.0],[a12, a22]]
}

struct Oracle<'a> {
    f: &'a dyn Fn(f64,f64,f64) -> V3,
    scales: [f64;3],  // natural-units per grid-coordinate unit
    alpha: f64,
}

impl<'a> Oracle<'a> {
    /// gbar at natural coords x, as 3x3 with grid-unit scaling folded in
    fn gbar(&self, x: [f64;3]) -> [[f64;3];3] {
        let g = oracle_metric(self.f, self.scales, x);
        let mut gb = [[0.0;3];3];
        gb[0][0] = self.alpha*self.alpha;
        for i in 0..2 { for j in 0..2 { gb[1+i][1+j] = g[i][j]; } }
        gb
    }
    fn christoffel(&self, x: [f64;3]) -> [[[f64;3];3];3] {
        let dg = 1e-3;
        // partials of gbar along grid axes: FD in natural coords scaled
        let mut dgb = [[[0.0;3];3];3];
        for axis in 0..3 {
            let mut lo = x; let mut hi = x;
            let step = dg * self.scales[axis];
            lo[axis] -= step; hi[axis] += step;
            let (a, b) = (self.gbar(lo), self.gbar(hi));
            for i in 0..3 { for j in 0..3 {
                dgb[axis][i][j] = (b[i][j]-a[i][j])/(2.0*dg);
            } }
        }
        let gb = self.gbar(x);
        // invert block metric
        let g = [[gb[1][1], gb[1][2]],[gb[2][1], gb[2][2]]];
        let det = g[0][0]*g[1][1]-g[0][1]*g[1][0];
        let gi = [[g[1][1]/det, -g[0][1]/det],[-g[1][0]/det, g[0][0]/det]];
        let mut gbinv = [[0.0;3];3];
        gbinv[0][0] = 1.0/(self.alpha*self.alpha);
        for i in 0..2 { for j in 0..2 { gbinv[1+i][1+j] = gi[i][j]; } }
        let mut c = [[[0.0;3];3];3];
        for j in 0..3 { for i in 0..3 { for k in 0..3 {
            let mut v = 0.0;
            for m in 0..3 {
                v += gbinv[j][m]*(dgb[k][m][i] + dgb[i][m][k] - dgb[m][i][k]);
            }
            c[j][i][k] = 0.5*v;
        } } }
        c
    }
    fn abar(&self, x: [f64;3]) -> [[f64;3];3] {
        let g = oracle_metric(self.f, self.scales, x);
        let a = frame_of(&g);
        let mut ab = [[0.0;3];3];
        ab[0][0] = 1.0/self.alpha;
        for i in 0..2 { for l in 0..2 { ab[1+i][1+l] = a[i][l]; } }
        ab
    }
    fn connection(&self, x: [f64;3]) -> [[[f64;3];3];3] {
        let dg = 1e-3;
        let mut dab = [[[0.0;3];3];3];
        for axis in 0..3 {
            let mut lo = x; let mut hi = x;
            let step = dg * self.scales[axis];
            lo[axis] -= step; hi[axis] += step;
            let (a, b) = (self.abar(lo), self.abar(hi));
            for i in 0..3 { for j in 0..3 { dab[axis][i][j] = (b[i][j]-a[i][j])/(2.0*dg); } }
        }
        let ab = self.abar(x);
        let gb = self.gbar(x);
        let gamma = self.christoffel(x);
        let mut om = [[[0.0;3];3];3];
        for i in 0..3 { for k in 0..3 {
            let mut inner = [0.0;3];
            for m in 0..3 {
                let mut acc = 0.0;
                for l in 0..3 {
                    let al = ab[i][l];
                    if al == 0.0 { continue; }
                    let mut term = dab[l][k][m];
                    for n in 0..3 { term += ab[k][n]*gamma[m][l][n]; }
                    acc += al*term;
                }
                inner[m] = acc;
            }
            for j in 0..3 {
                let mut v = 0.0;
                for m in 0..3 { for h in 0..3 {
                    v += inner[m]*gb[m][h]*ab[j][h];
                } }
                om[j][i][k] = v;
            }
        } }
        om
    }
}

fn level_errors(spec: &AnalyticSurfaceSpec<f64>, f: &dyn Fn(f64,f64,f64)->V3, natural: impl Fn(usize,usize,usize,&GridDims,&GridSteps<f64>)->[f64;3], scales: [f64;3], alpha: f64, stride: usize) -> (f64, f64) {
    let exact = make_surface(spec).unwrap();
    let fd = SurfaceGrid::from_samples(exact.dims, exact.steps, exact.wrap, exact.f.clone()).unwrap();
    let geom = build_geometry(&fd, alpha).unwrap();
    let chris = christoffel_symbols(&geom);
    let frame = surface_flow::geometry::orthonormal_frame(&geom).unwrap();
    let conn = connection_coefficients(&frame, &chris, &geom).unwrap();
    let oracle = Oracle { f, scales, alpha };
    let dims = exact.dims;
    let (mut ec, mut eo) = (0.0f64, 0.0f64);
    let mut t = 1;
    while t < dims.nt - 1 {
        let mut i1 = 0;
        while i1 < dims.n1 {
            let mut i2 = 1;
            while i2 < dims.n2 - 1 {
                let p = dims.index(t, i1, i2);
                let x = natural(t, i1, i2, &dims, &exact.steps);
                let co = oracle.christoffel(x);
                let oo = oracle.connection(x);
                for j in 0..3 { for i in 0..3 { for k in 0..3 {
                    ec = ec.max((chris.gamma[p][j][i][k] - co[j][i][k]).abs());
                    eo = eo.max((conn.omega[p][j][i][k] - oo[j][i][k]).abs());
                } } }
                i2 += stride;
            }
            i1 += stride;
        }
        t += stride.max(2);
    }
    (ec, eo)
}

fn main() {
    println!("== torus ==");
    let mut prev: Option<(f64,f64)> = None;
    for (nt, n1, n2, stride) in [(9usize, 48usize, 36usize, 2usize), (17, 96, 72, 4), (33, 192, 144, 8)] {
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::DeformingTorus { big_radius: 2.0, drift: 1.0, ripple: 0.2, ripple_freq: 8 },
            grid: GridSpec::natural_torus(nt, n1, n2, 1.0),
        };
        let duration = 1.0;
        let scales = [1.0, 1.0, 1.0]; // natural units: grid coords ARE angles
        let f = move |t: f64, a: f64, b: f64| torus_f(t / duration, a, b);
        let (ec, eo) = level_errors(&spec, &f,
            |t, i1, i2, _d, st| [t as f64 * st.h_t, i1 as f64 * st.h_1, i2 as f64 * st.h_2],
            scales, 1.0, stride);
        let (rc, ro) = prev.map(|(a, b)| (a/ec, b/eo)).unwrap_or((0.0, 0.0));
        println!("{nt}x{n1}x{n2}: christoffel {ec:.4e} (ratio {rc:.2})  connection {eo:.4e} (ratio {ro:.2})");
        prev = Some((ec, eo));
    }
    println!("== sphere ==");
    let mut prev: Option<(f64,f64)> = None;
    for (n1, n2, stride) in [(32usize, 24usize, 2usize), (64, 48, 4), (128, 96, 8)] {
        let spec = AnalyticSurfaceSpec::<f64> {
            kind: SurfaceKind::SphereChart { radius: 1.0, pole_margin: 0.15 },
            grid: GridSpec::new(5, n1, n2, GridSteps::unit()),
        };
        // chart maps: theta = s1 x1, phi = margin + s2 x2
        let s1 = 2.0*std::f64::consts::PI/(n1 as f64);
        let s2 = (std::f64::consts::PI - 0.3)/((n2-1) as f64);
        let f = move |_t: f64, a: f64, b: f64| sphere_f(0.0, a, b);
        let (ec, eo) = level_errors(&spec, &f,
            move |_t, i1, i2, _d, _st| [0.0, s1 * i1 as f64, 0.15 + s2 * i2 as f64],
            [1.0, s1, s2], 1.0, stride);
        let (rc, ro) = prev.map(|(a, b)| (a/ec, b/eo)).unwrap_or((0.0, 0.0));
        println!("5x{n1}x{n2}: christoffel {ec:.4e} (ratio {rc:.2})  connection {eo:.4e} (ratio {ro:.2})");
        prev = Some((ec, eo));
    }
}
