use std::path::Path;

use balanced_spectral::format::ProblemFile;
use balanced_spectral::greens::{EigenSettings, RegularProblem, SpectralMeasure};
use balanced_spectral::ivp::{PencilSign, SpectralProblem, Tolerances, VectorFn};
use balanced_spectral::linalg::{c, CMat, CVec, C64};
use balanced_spectral::measures::{validate_coefficients, Side};
use balanced_spectral::par::Exec;
use balanced_spectral::spectral::{fourier, inverse, parseval_check};
use balanced_spectral::structure::{compute_kernel, validate_boundary_conditions};
use balanced_spectral::weyl2::{classify_endpoint, deficiency_from_verdicts, m_function_2x2, Endpoint, WeylSettings};
use balanced_spectral::Error;
use log::info;

use crate::table::{complex, emit, matrix_cells, matrix_columns, real, vector_cells, vector_columns, Table};
use crate::{Command, Common};

type Result<T> = std::result::Result<T, Error>;

const DEFAULT_GRID: usize = 100;
const DEFAULT_GREEN_GRID: usize = 20;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate(common) => validate(&common),
        Command::SolveIvp { common, lambda, u0 } => solve_ivp(&common, lambda, u0),
        Command::LambdaSet(common) => lambda_set(&common),
        Command::Eigs(common) => eigs(&common),
        Command::Mfun { common, imag } => mfun(&common, imag),
        Command::Green { common, lambda } => green(&common, lambda),
        Command::Transform(common) => transform(&common),
        Command::Weyl { common, lambda } => weyl(&common, lambda),
    }
}

impl Common {
    fn checked(&self) -> Result<()> {
        for (name, v) in [("--tol-eig", self.tol_eig), ("--tol-quad", self.tol_quad)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Usage(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(w) = &self.window {
            if !(w[0] <= w[1]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::Usage(format!("--window {} {} is not an ordered pair of finite numbers", w[0], w[1])));
            }
        }
        if self.grid == Some(0) {
            return Err(Error::Usage("--grid must be at least 1".into()));
        }
        Ok(())
    }

    fn file(&self) -> Result<ProblemFile> {
        self.checked()?;
        let text = std::fs::read_to_string(&self.file).map_err(|e| Error::Parse {
            line: 0,
            column: 0,
            message: format!("cannot read {}: {e}", self.file.display()),
        })?;
        ProblemFile::parse(&text)
    }

    fn problem(&self) -> Result<(ProblemFile, SpectralProblem)> {
        let file = self.file()?;
        let mut p = file.problem()?;
        if let Some(t) = self.tol_quad {
            let mut tol: Tolerances = p.tolerances();
            tol.quad.rel_tol = t;
            tol.quad.abs_tol = t;
            p = p.with_tolerances(tol);
        }
        Ok((file, p))
    }

    fn regular(&self) -> Result<(ProblemFile, RegularProblem)> {
        let (file, p) = self.problem()?;
        let bc = file
            .boundary
            .clone()
            .ok_or_else(|| Error::Usage(format!("{} has no boundary matrix", self.file.display())))?;
        let rp = RegularProblem::new(p, &bc)?;
        Ok((file, rp))
    }

    fn window(&self) -> Result<(f64, f64)> {
        self.window
            .as_ref()
            .map(|w| (w[0], w[1]))
            .ok_or_else(|| Error::Usage("--window LO HI is required".into()))
    }

    fn eigen_settings(&self) -> EigenSettings {
        let mut s = EigenSettings::default();
        if let Some(g) = self.grid {
            s.grid = g;
        }
        if let Some(t) = self.tol_eig {
            s.tol = t;
        }
        s
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

/// `J skew-Hermitian` → `J not skew-Hermitian`.
fn negate(check: &str) -> String {
    match check.split_once(' ') {
        Some((subject, predicate)) => format!("{subject} not {predicate}"),
        None => format!("{check} inconsistent"),
    }
}

/// Rounds away representation noise for display.
fn short(x: f64) -> String {
    let r = (x * 1e12).round() / 1e12;
    real(if r == 0.0 { 0.0 } else { r })
}

fn describe_lambda_set(values: &[C64]) -> String {
    let same = |a: C64, b: C64| (a - b).norm() <= 1e-9 * (1.0 + a.norm());
    let mut distinct: Vec<C64> = Vec::new();
    for &z in values {
        if !distinct.iter().any(|&d| same(d, z)) {
            distinct.push(z);
        }
    }
    distinct.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    let mut parts = Vec::new();
    let mut used = vec![false; distinct.len()];
    for i in 0..distinct.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = distinct[i];
        let partner = (0..distinct.len()).find(|&k| !used[k] && z.im != 0.0 && same(distinct[k], z.conj()));
        let re = if z.re.abs() <= 1e-9 * (1.0 + z.norm()) { None } else { Some(short(z.re)) };
        match partner {
            Some(k) => {
                used[k] = true;
                let im = short(z.im.abs());
                parts.push(match re {
                    Some(re) => format!("{re}±{im}i"),
                    None => format!("±{im}i"),
                });
            }
            None if z.im.abs() <= 1e-12 * (1.0 + z.norm()) => parts.push(short(z.re)),
            None => {
                let sign = if z.im < 0.0 { "-" } else { "+" };
                parts.push(format!("{}{sign}{}i", re.unwrap_or_default(), short(z.im.abs())));
            }
        }
    }
    if parts.is_empty() {
        "∅".into()
    } else {
        format!("{{{}}}", parts.join(", "))
    }
}

fn validate(common: &Common) -> Result<()> {
    let file = common.file()?;
    let (q, w) = file.measures()?;
    let report = validate_coefficients(&q, &w, &file.j);
    let mut text = String::new();
    for check in &report.checks {
        if check.passed {
            text += &format!("ok: {}\n", check.name);
        } else {
            text += &format!("{} ({})\n", negate(check.name), check.detail);
        }
    }
    if !report.is_conforming() {
        emit(common.out(), &text)?;
        return Err(Error::NonConforming(report.checks.iter().filter(|c| !c.passed).map(|c| negate(c.name)).collect()));
    }
    let p = file.problem()?;
    let set = p.lambda_set();
    let real_part = if set.intersects_real_axis() { "Λ∩ℝ nonempty" } else { "Λ∩ℝ empty" };
    let ends = match (p.endpoint_is_regular(false), p.endpoint_is_regular(true)) {
        (true, true) => "endpoints regular".to_string(),
        (l, r) => {
            let word = |ok: bool| if ok { "regular" } else { "singular" };
            format!("left endpoint {}, right endpoint {}", word(l), word(r))
        }
    };
    text += &format!("Λ = {}; {real_part}; {ends}\n", describe_lambda_set(&set.values()));
    let mut rejected = None;
    if let Some(bc) = &file.boundary {
        let outcome = compute_kernel(&p).and_then(|k| validate_boundary_conditions(&p, &k, bc));
        match outcome {
            Ok(v) => text += &format!("boundary conditions accepted: n₊ = {}, {}\n", v.n_plus, v.kind),
            Err(e) => {
                text += &format!("{e}\n");
                rejected = Some(e);
            }
        }
    }
    emit(common.out(), &text)?;
    rejected.map_or(Ok(()), Err)
}

/// Finite x-range for sampling: the interval, with infinite ends replaced by
/// one unit beyond the outermost breakpoint or anchor.
fn x_range(p: &SpectralProblem) -> (f64, f64) {
    let iv = p.interval();
    let mut marks = p.breakpoints();
    marks.push(p.x0());
    marks.retain(|x| x.is_finite());
    let lo = if iv.a.is_finite() { iv.a } else { marks.iter().copied().fold(f64::INFINITY, f64::min) - 1.0 };
    let hi = if iv.b.is_finite() { iv.b } else { marks.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0 };
    (lo, hi)
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| if k == count { hi } else { lo + (hi - lo) * k as f64 / count as f64 }).collect()
}

fn solve_ivp(common: &Common, lambda: C64, u0: Option<Vec<C64>>) -> Result<()> {
    let (_, p) = common.problem()?;
    let n = p.n();
    if let Some(u) = &u0 {
        if u.len() != n {
            return Err(Error::Usage(format!("--u0 has {} entries, expected {n}", u.len())));
        }
    }
    let u = p.fundamental_matrix(lambda)?;
    let (lo, hi) = x_range(&p);
    let xs = grid(lo, hi, common.grid.unwrap_or(DEFAULT_GRID));
    let mut header = vec!["x".to_string()];
    header.extend(match u0 {
        Some(_) => vector_columns("u", n),
        None => matrix_columns("U", n, n),
    });
    let mut table = Table::new(header);
    for &x in &xs {
        let m = u.eval(x, Side::Balanced)?;
        let mut row = vec![real(x)];
        row.extend(match &u0 {
            Some(v) => vector_cells(&(&m * CVec::from_vec(v.clone()))),
            None => matrix_cells(&m),
        });
        table.push(row);
    }
    emit(common.out(), &table.to_csv())
}

fn lambda_set(common: &Common) -> Result<()> {
    let (_, p) = common.problem()?;
    let set = p.lambda_set();
    let mut table = Table::new(["index", "lambda", "location", "sign"]);
    for (k, e) in set.entries.iter().enumerate() {
        let sign = match e.sign {
            PencilSign::Plus => "+",
            PencilSign::Minus => "-",
        };
        table.push(vec![(k + 1).to_string(), complex(e.lambda), real(e.location), sign.into()]);
    }
    emit(common.out(), &table.to_csv())
}

fn spectral_measure(common: &Common, rp: &RegularProblem) -> Result<SpectralMeasure> {
    let (lo, hi) = common.window()?;
    if lo == hi {
        return Ok(SpectralMeasure { window: (lo, hi), points: Vec::new() });
    }
    let sm = rp.spectral_measure(lo, hi, &common.eigen_settings())?;
    info!("{} eigenvalues in [{lo}, {hi}]", sm.points.len());
    Ok(sm)
}

fn eigs(common: &Common) -> Result<()> {
    let (_, rp) = common.regular()?;
    let sm = spectral_measure(common, &rp)?;
    let n = rp.n();
    let mut header: Vec<String> = ["index", "lambda", "multiplicity"].map(String::from).to_vec();
    header.extend(matrix_columns("dnu", n, n));
    let mut table = Table::new(header);
    for (k, pt) in sm.points.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), real(pt.lambda), pt.multiplicity.to_string()];
        row.extend(matrix_cells(&pt.weight));
        table.push(row);
    }
    emit(common.out(), &table.to_csv())
}

fn mfun(common: &Common, imag: f64) -> Result<()> {
    let (_, rp) = common.regular()?;
    let (lo, hi) = common.window()?;
    let ts = grid(lo, hi, common.grid.unwrap_or(DEFAULT_GRID));
    let points: Vec<C64> = ts.iter().map(|&t| c(t, imag)).collect();
    let values = rp.m_function().sweep(&points, Exec::default())?;
    let n = rp.n();
    let mut header: Vec<String> = vec!["lambda".into()];
    header.extend(matrix_columns("m", n, n));
    let mut table = Table::new(header);
    for (l, m) in points.iter().zip(&values) {
        let mut row = vec![complex(*l)];
        row.extend(matrix_cells(m));
        table.push(row);
    }
    emit(common.out(), &table.to_csv())
}

fn green(common: &Common, lambda: C64) -> Result<()> {
    let (_, rp) = common.regular()?;
    let kernel = rp.green_kernel(lambda)?;
    let (lo, hi) = x_range(rp.problem());
    let xs = grid(lo, hi, common.grid.unwrap_or(DEFAULT_GREEN_GRID));
    let n = rp.n();
    let mut header: Vec<String> = vec!["x".into(), "y".into()];
    header.extend(matrix_columns("g", n, n));
    let mut table = Table::new(header);
    for &x in &xs {
        for &y in &xs {
            let g: CMat = kernel.eval(x, y)?;
            let mut row = vec![real(x), real(y)];
            row.extend(matrix_cells(&g));
            table.push(row);
        }
    }
    emit(common.out(), &table.to_csv())
}

fn transform(common: &Common) -> Result<()> {
    let (file, rp) = common.regular()?;
    let f: VectorFn = file
        .function()
        .ok_or_else(|| Error::Usage(format!("{} has no f block", common.file.display())))??;
    let sm = spectral_measure(common, &rp)?;
    let p = rp.problem();
    let n = p.n();
    let exec = Exec::default();

    let mut header: Vec<String> = vec!["index".into(), "lambda".into()];
    header.extend(vector_columns("fhat", n));
    let mut coefficients = Table::new(header);
    let mut reconstruction = {
        let mut header: Vec<String> = vec!["x".into()];
        header.extend(vector_columns("f", n));
        header.extend(vector_columns("gf", n));
        Table::new(header)
    };
    let (lo, hi) = x_range(p);
    let xs = grid(lo, hi, common.grid.unwrap_or(DEFAULT_GRID));
    let mut parseval = Table::new(["lhs", "rhs", "residual", "tail_energy"]);

    if sm.points.is_empty() {
        for &x in &xs {
            let mut row = vec![real(x)];
            row.extend(vector_cells(&f(x)));
            row.extend(vector_cells(&CVec::zeros(n)));
            reconstruction.push(row);
        }
    } else {
        let tr = fourier(p, &sm, &f, exec)?;
        for (k, (l, v)) in tr.eigenvalues.iter().zip(&tr.coefficients).enumerate() {
            let mut row = vec![(k + 1).to_string(), real(*l)];
            row.extend(vector_cells(v));
            coefficients.push(row);
        }
        let rec = inverse(p, &sm, &tr.coefficients, &xs, exec)?;
        for (&x, g) in xs.iter().zip(&rec) {
            let mut row = vec![real(x)];
            row.extend(vector_cells(&f(x)));
            row.extend(vector_cells(g));
            reconstruction.push(row);
        }
        let rep = parseval_check(p, &sm, &f, &f, exec)?;
        parseval.push(vec![complex(rep.lhs), complex(rep.rhs), real(rep.residual), real(rep.tail_energy_f)]);
    }
    let text = [coefficients.to_csv(), reconstruction.to_csv(), parseval.to_csv()].join("\n");
    emit(common.out(), &text)
}

fn weyl(common: &Common, lambda: C64) -> Result<()> {
    let (_, p) = common.problem()?;
    let settings = WeylSettings::default();
    let mut table = Table::new(["endpoint", "location", "verdict", "mu_min", "mu_max", "disk_radius"]);
    let mut verdicts = Vec::new();
    for (name, e) in [("left", Endpoint::Left), ("right", Endpoint::Right)] {
        let cl = classify_endpoint(&p, e, &settings)?;
        let last = cl.truncations.last();
        table.push(vec![
            name.into(),
            real(cl.location),
            cl.verdict.to_string(),
            last.map_or(String::new(), |t| real(t.mu_min)),
            last.map_or(String::new(), |t| real(t.mu_max)),
            last.map_or(String::new(), |t| real(t.disk_radius)),
        ]);
        verdicts.push(cl.verdict);
    }
    let mut summary = Table::new(["n_plus"]);
    summary.push(vec![deficiency_from_verdicts(verdicts[0], verdicts[1]).map_or("undecided".into(), |d| d.to_string())]);
    let mut blocks = vec![table.to_csv(), summary.to_csv()];
    if let Some(alpha) = common.alpha {
        let rep = m_function_2x2(&p, alpha, lambda, &settings)?;
        let mut m = Table::new(["alpha", "lambda", "m", "m_contraction", "agreement"]);
        m.push(vec![real(alpha), complex(lambda), complex(rep.disk_center), complex(rep.contraction), real(rep.agreement)]);
        blocks.push(m.to_csv());
    }
    emit(common.out(), &blocks.join("\n"))
}
