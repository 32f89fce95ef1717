use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trainer::Variant;

use super::RUN_COLUMNS;

/// Evaluation points of one per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCurve {
    pub path: PathBuf,
    pub variant: Variant,
    /// K of the first row. Annealing may lower K later in the run.
    pub k: usize,
    /// `(epoch, success rate)` for every evaluated epoch.
    pub points: Vec<(usize, f64)>,
}

/// Success rate averaged over the runs of one `(variant, K)` group.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub variant: Variant,
    pub k: usize,
    pub runs: usize,
    pub points: Vec<(usize, f64)>,
}

impl Curve {
    pub fn label(&self) -> String {
        self.variant.label(self.k)
    }

    pub fn success_at(&self, epoch: usize) -> Option<f64> {
        self.points.iter().find(|(e, _)| *e == epoch).map(|(_, s)| *s)
    }

    /// First evaluated epoch whose success rate reaches `level`.
    pub fn epochs_to(&self, level: f64) -> Option<usize> {
        self.points.iter().find(|(_, s)| *s >= level).map(|(e, _)| *e)
    }
}

/// Files written by [`plot_curves`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotOutput {
    pub charts: Vec<PathBuf>,
    pub table: PathBuf,
}

/// Reads every per-run CSV in `dir` (all `*.csv` except `summary.csv`),
/// sorted by file name.
pub fn read_curves(dir: &Path) -> Result<Vec<RunCurve>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| p.file_name().is_some_and(|n| n != "summary.csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_run_curve(p)).collect()
}

fn read_run_curve(path: &Path) -> Result<RunCurve> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{}: missing column {name}", path.display())))
    };
    for name in RUN_COLUMNS {
        column(name)?;
    }
    let (epoch_col, variant_col, k_col, success_col) =
        (column("epoch")?, column("variant")?, column("K")?, column("success")?);
    let bad = |what: &str, row: usize| Error::Format(format!("{}: bad {what} on row {row}", path.display()));
    let mut head = None;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2;
        if head.is_none() {
            let variant = Variant::from_name(&record[variant_col]).ok_or_else(|| bad("variant", row))?;
            let k: usize = record[k_col].parse().map_err(|_| bad("K", row))?;
            head = Some((variant, k));
        }
        let success = &record[success_col];
        if success.is_empty() {
            continue;
        }
        let epoch: usize = record[epoch_col].parse().map_err(|_| bad("epoch", row))?;
        let success: f64 = success.parse().map_err(|_| bad("success", row))?;
        points.push((epoch, success));
    }
    let (variant, k) = head.ok_or_else(|| Error::Format(format!("{}: no rows", path.display())))?;
    Ok(RunCurve {
        path: path.to_path_buf(),
        variant,
        k,
        points,
    })
}

/// Groups runs by `(variant, K)` and averages success over the epochs that
/// every run of the group evaluated.
pub fn average_curves(runs: &[RunCurve]) -> Vec<Curve> {
    let mut groups: BTreeMap<(Variant, usize), Vec<&RunCurve>> = BTreeMap::new();
    for run in runs {
        groups.entry((run.variant, run.k)).or_default().push(run);
    }
    groups
        .into_iter()
        .map(|((variant, k), members)| {
            let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
            for run in &members {
                for (e, s) in &run.points {
                    let slot = sums.entry(*e).or_insert((0.0, 0));
                    slot.0 += s;
                    slot.1 += 1;
                }
            }
            let points = sums
                .into_iter()
                .filter(|(_, (_, n))| *n == members.len())
                .map(|(e, (sum, n))| (e, sum / n as f64))
                .collect();
            Curve {
                variant,
                k,
                runs: members.len(),
                points,
            }
        })
        .collect()
}

/// Renders `learning_curves.svg`, `k_sweep.svg`, `world_model_ablation.svg`
/// and `success_table.txt` from the run CSVs in `input`.
///
/// Nothing is written when `input` holds no run CSVs or any CSV is invalid.
pub fn plot_curves(input: &Path, output: &Path) -> Result<PlotOutput> {
    let runs = read_curves(input)?;
    if runs.is_empty() {
        return Err(Error::Format(format!("no run CSVs in {}", input.display())));
    }
    let curves = average_curves(&runs);
    let pick = |keep: &dyn Fn(&Curve) -> bool| curves.iter().filter(|c| keep(c)).cloned().collect::<Vec<_>>();
    let files = [
        (
            "learning_curves.svg",
            render_svg(
                "Success rate during training",
                &pick(&|c| matches!(c.variant, Variant::Dqn | Variant::Ddq | Variant::DqnK)),
            ),
        ),
        (
            "k_sweep.svg",
            render_svg(
                "Planning steps K",
                &pick(&|c| matches!(c.variant, Variant::Dqn | Variant::Ddq)),
            ),
        ),
        (
            "world_model_ablation.svg",
            render_svg(
                "World model ablation",
                &pick(&|c| {
                    matches!(
                        c.variant,
                        Variant::Dqn | Variant::Ddq | Variant::DdqFixedWm | Variant::DdqRandInit
                    )
                }),
            ),
        ),
        ("success_table.txt", render_table(&curves)),
    ];
    fs::create_dir_all(output)?;
    let mut written = Vec::new();
    for (name, body) in &files {
        let path = output.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    let table = written.pop().expect("table is the last file");
    Ok(PlotOutput { charts: written, table })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn render_svg(title: &str, curves: &[Curve]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (60.0, 200.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_epoch = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|(e, _)| *e))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let x = |e: f64| left + pw * e / max_epoch;
    let y = |s: f64| top + ph * (1.0 - s.clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let s = i as f64 / 5.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.1}" x2="{x2}" y2="{y:.1}" stroke="#ddd"/><text x="{tx}" y="{ty:.1}" text-anchor="end">{s:.1}</text>"##,
            y = y(s),
            x2 = left + pw,
            tx = left - 6.0,
            ty = y(s) + 4.0,
        );
    }
    for i in 0..=6 {
        let e = max_epoch * i as f64 / 6.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#,
            x(e),
            top + ph + 18.0,
            e
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">success rate</text>"#,
        top + ph / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|(e, s)| format!("{:.1},{:.1}", x(*e as f64), y(*s)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = top + 10.0 + 20.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2.5"/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&c.label())
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_table(curves: &[Curve]) -> String {
    let mut epochs: Vec<usize> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|(e, _)| *e))
        .filter(|e| e % 100 == 0)
        .collect();
    if let Some(last) = curves.iter().filter_map(|c| c.points.last().map(|(e, _)| *e)).max() {
        epochs.push(last);
    }
    epochs.sort_unstable();
    epochs.dedup();
    let width = curves.iter().map(|c| c.label().chars().count()).max().unwrap_or(0).max(7);
    let mut out = format!("{:width$}  runs", "variant");
    for e in &epochs {
        let _ = write!(out, "  {:>7}", format!("ep{e}"));
    }
    out.push('\n');
    for c in curves {
        let label = c.label();
        let pad = width - label.chars().count();
        let _ = write!(out, "{label}{}  {:>4}", " ".repeat(pad), c.runs);
        for e in &epochs {
            match c.success_at(*e) {
                Some(s) => {
                    let _ = write!(out, "  {s:>7.3}");
                }
                None => out.push_str("        -"),
            }
        }
        out.push('\n');
    }
    out
}
