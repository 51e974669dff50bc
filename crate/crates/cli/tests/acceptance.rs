//! Acceptance checks for the two benchmark-level claims: the polynomial-grid
//! consistency picture and the matrix-factorization matvec comparison.

use pnewton_cli::config::{KernelName, ScaleSpec};
use pnewton_cli::experiments::{matfact_bench, poly1d_grid, PnSolver, PolyCell, PolyMethod};

fn cell<'a>(rows: &'a [PolyCell], p: usize, x0: f64, method: &str) -> &'a PolyCell {
    rows.iter()
        .find(|r| r.p == p && r.x0 == x0 && r.method == method)
        .expect("grid cell present")
}

fn print_grid(rows: &[PolyCell], methods: &[&str]) {
    println!("  p   x0   {}", methods.join("          "));
    for p in [2usize, 4, 8, 16] {
        for x0 in [1.0, 10.0, 100.0] {
            let counts: Vec<String> = methods
                .iter()
                .map(|m| {
                    let c = cell(rows, p, x0, m);
                    format!("{:>4}{}", c.iterations, if c.converged { " " } else { "!" })
                })
                .collect();
            println!("  {p:<3} {x0:<4} {}", counts.join("      "));
        }
    }
    println!("  ('!' marks a run that did not converge)");
}

// Polynomial-grid reproduction: the pure preconditioned iteration is asserted
// exactly as specified (convergence within 30 iterations on every cell, cell
// ratio at most 3, vanilla Newton needing more than 50 at the steep corner).
//
// The far cells x0 ∈ {10, 100} are outside the pure iteration's basin: its
// step exceeds twice the distance to the minimizer once asinh(|f'|) >
// 2(p−1), and the overshoot grows by a factor of about ln|x| per sweep, for
// every p and any fixed kernel scale. The linesearch-globalized variant is
// the one that exhibits the grid-wide consistency; its table is printed for
// comparison before this test fails on the divergent pure cells.
#[test]
fn a03_poly1d_grid_figure_reproduction() {
    let ps = [2usize, 4, 8, 16];
    let x0s = [1.0, 10.0, 100.0];
    let methods = [
        PolyMethod::Newton,
        PolyMethod::Pn(KernelName::Cosh),
        PolyMethod::Globalized(KernelName::Cosh),
    ];
    let rows = poly1d_grid(&ps, &x0s, &methods, ScaleSpec::Fixed(1.0), 1e-8, 200);

    println!("polynomial grid, iterations to |f'| <= 1e-8:");
    print_grid(&rows, &["newton", "pn-cosh", "globalized-cosh"]);

    // vanilla Newton deteriorates at the steep corner
    let corner = cell(&rows, 16, 100.0, "newton");
    assert!(
        corner.converged && corner.iterations > 50,
        "vanilla corner: {} iterations, converged = {}",
        corner.iterations,
        corner.converged
    );
    println!("PASS a03(c): vanilla corner took {} iterations (> 50)", corner.iterations);

    // the globalized variant shows the consistency picture across the grid
    let glob: Vec<&PolyCell> = rows
        .iter()
        .filter(|r| r.method == "globalized-cosh")
        .collect();
    assert!(glob.iter().all(|c| c.converged && c.iterations <= 30));
    println!(
        "  (globalized-cosh: every cell converged within {} iterations)",
        glob.iter().map(|c| c.iterations).max().unwrap()
    );

    // pure-iteration consistency, asserted as specified
    let pure: Vec<&PolyCell> = rows.iter().filter(|r| r.method == "pn-cosh").collect();
    let bad: Vec<String> = pure
        .iter()
        .filter(|c| !(c.converged && c.iterations <= 30))
        .map(|c| format!("(p={}, x0={}) {}its conv={}", c.p, c.x0, c.iterations, c.converged))
        .collect();
    assert!(
        bad.is_empty(),
        "pure pn-cosh misses the 30-iteration contract on {} of 12 cells: {}",
        bad.len(),
        bad.join(", ")
    );
    let max = pure.iter().map(|c| c.iterations).max().unwrap() as f64;
    let min = pure.iter().map(|c| c.iterations).min().unwrap().max(1) as f64;
    assert!(max / min <= 3.0, "cell ratio {max}/{min} exceeds 3");
    println!("PASS a03: pure pn-cosh consistent across the grid");
}

// Matrix-factorization comparison at the enlarged initialization: the median
// Hessian-product count of every fast-growth preconditioned variant beats the
// vanilla baseline at each condition number.
#[test]
fn a11_matfact_median_matvecs() {
    let conds = [1.0, 1e4, 1e8];
    let kernels = [KernelName::Cosh, KernelName::Expabs, KernelName::Logbar];
    let rows = matfact_bench(&conds, 100.0, 20, 42, 10, 5, &kernels, PnSolver::Cg).unwrap();

    println!("matfact 10x5, x0 scale 100, 20 seeds, median Hessian products:");
    for r in &rows {
        println!(
            "  cond {:>9} {:<10} median {:>8} ({}/{} converged)",
            r.cond, r.method, r.median_matvecs, r.converged_runs, r.repeats
        );
    }
    for &cond in &conds {
        let newton = rows
            .iter()
            .find(|r| r.cond == cond && r.method == "newton")
            .unwrap()
            .median_matvecs;
        for k in &kernels {
            let m = rows
                .iter()
                .find(|r| r.cond == cond && r.method == format!("pn-{}", k.as_str()))
                .unwrap()
                .median_matvecs;
            assert!(
                m < newton,
                "cond {cond}: pn-{} median {m} not below newton {newton}",
                k.as_str()
            );
        }
    }
    println!("PASS a11: every preconditioned median strictly below the vanilla median");

    // report-only: the raw-asymmetric GMRES route of the same comparison
    let report = matfact_bench(&conds, 100.0, 5, 42, 10, 5, &kernels, PnSolver::Gmres).unwrap();
    println!("  report (GMRES route, 5 seeds):");
    for r in &report {
        println!(
            "    cond {:>9} {:<10} median {:>8} ({}/{} converged)",
            r.cond, r.method, r.median_matvecs, r.converged_runs, r.repeats
        );
    }
}
