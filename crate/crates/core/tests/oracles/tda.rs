//! Dense Vietoris-Rips persistence: every simplex up to triangles listed
//! directly, a full Z/2 boundary matrix, and textbook column reduction.

pub type Bars = (Vec<(f64, f64)>, Vec<(f64, f64)>);

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn vr_diagram(points: &[Vec<f64>], scale: f64) -> Bars {
    let n = points.len();
    let mut cells: Vec<(f64, Vec<usize>)> = (0..n).map(|i| (0.0, vec![i])).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(&points[i], &points[j]);
            if d <= scale {
                cells.push((d, vec![i, j]));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let ds = [dist(&points[i], &points[j]), dist(&points[i], &points[k]), dist(&points[j], &points[k])];
                if ds.iter().all(|&d| d <= scale) {
                    cells.push((ds.iter().copied().fold(0.0, f64::max), vec![i, j, k]));
                }
            }
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(&b.1)));
    let m = cells.len();
    let mut matrix = vec![vec![false; m]; m];
    for (j, (_, vs)) in cells.iter().enumerate() {
        if vs.len() < 2 {
            continue;
        }
        for skip in 0..vs.len() {
            let face: Vec<usize> = vs.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            let i = cells.iter().position(|(_, f)| *f == face).expect("face present");
            matrix[j][i] = true;
        }
    }
    let low = |col: &Vec<bool>| col.iter().rposition(|&b| b);
    for j in 0..m {
        loop {
            let Some(l) = low(&matrix[j]) else { break };
            let Some(k) = (0..j).find(|&k| low(&matrix[k]) == Some(l)) else { break };
            let other = matrix[k].clone();
            for (a, b) in matrix[j].iter_mut().zip(other) {
                *a ^= b;
            }
        }
    }
    let mut bars: Bars = (Vec::new(), Vec::new());
    for i in 0..m {
        if low(&matrix[i]).is_some() {
            continue;
        }
        let death = (0..m).find(|&j| low(&matrix[j]) == Some(i)).map_or(f64::INFINITY, |j| cells[j].0);
        let (birth, dim) = (cells[i].0, cells[i].1.len() - 1);
        if death > birth {
            match dim {
                0 => bars.0.push((birth, death)),
                1 => bars.1.push((birth, death)),
                _ => {}
            }
        }
    }
    let key = |a: &(f64, f64), b: &(f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
    bars.0.sort_by(key);
    bars.1.sort_by(key);
    bars
}
