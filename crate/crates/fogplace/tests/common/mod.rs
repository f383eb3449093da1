//! Shared test-side oracles, independent of the library's solver paths.

/// Min-cost assignment oracle by max-flow (BFS augmenting paths) followed by
/// negative-cycle canceling. Only valid for integer-valued instances (unit
/// augmentation steps). Returns the minimal cost of a maximum assignment.
pub fn mincost_assignment_oracle(costs: &[Vec<f64>], caps: &[f64], vols: &[f64]) -> (f64, f64) {
    let m = caps.len();
    let n = vols.len();
    let mut flow = vec![vec![0.0f64; n]; m];
    let mut cap_left = caps.to_vec();
    let mut vol_left = vols.to_vec();

    // Max flow, one unit at a time over alternating BFS paths.
    loop {
        let mut pred_f: Vec<Option<usize>> = vec![None; m];
        let mut pred_d: Vec<Option<usize>> = vec![None; n];
        let mut queue: Vec<usize> = Vec::new();
        for i in 0..m {
            if cap_left[i] > 0.5 {
                pred_f[i] = Some(usize::MAX);
                queue.push(i);
            }
        }
        let mut reached = None;
        'bfs: while let Some(i) = queue.pop() {
            for j in 0..n {
                if costs[i][j].is_finite() && pred_d[j].is_none() {
                    pred_d[j] = Some(i);
                    if vol_left[j] > 0.5 {
                        reached = Some(j);
                        break 'bfs;
                    }
                    for i2 in 0..m {
                        if flow[i2][j] > 0.5 && pred_f[i2].is_none() {
                            pred_f[i2] = Some(j);
                            queue.push(i2);
                        }
                    }
                }
            }
        }
        let Some(mut j) = reached else { break };
        vol_left[j] -= 1.0;
        loop {
            let i = pred_d[j].unwrap();
            flow[i][j] += 1.0;
            match pred_f[i] {
                Some(usize::MAX) | None => {
                    cap_left[i] -= 1.0;
                    break;
                }
                Some(back) => {
                    flow[i][back] -= 1.0;
                    j = back;
                }
            }
        }
    }

    // Cancel negative-cost cycles in the residual graph (s and t are plain
    // nodes, so cycles preserve the flow value).
    let s = m + n;
    let t = m + n + 1;
    let nodes = m + n + 2;
    loop {
        let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if !costs[i][j].is_finite() {
                    continue;
                }
                arcs.push((i, m + j, costs[i][j]));
                if flow[i][j] > 0.5 {
                    arcs.push((m + j, i, -costs[i][j]));
                }
            }
        }
        for i in 0..m {
            if cap_left[i] > 0.5 {
                arcs.push((s, i, 0.0));
            }
            if caps[i] - cap_left[i] > 0.5 {
                arcs.push((i, s, 0.0));
            }
        }
        for j in 0..n {
            if vol_left[j] > 0.5 {
                arcs.push((m + j, t, 0.0));
            }
            if vols[j] - vol_left[j] > 0.5 {
                arcs.push((t, m + j, 0.0));
            }
        }
        let mut dist = vec![0.0f64; nodes];
        let mut pred: Vec<Option<(usize, usize)>> = vec![None; nodes];
        let mut cycle_node = None;
        for pass in 0..nodes {
            let mut relaxed = false;
            for (k, &(u, v, c)) in arcs.iter().enumerate() {
                if dist[u] + c < dist[v] - 1e-9 {
                    dist[v] = dist[u] + c;
                    pred[v] = Some((u, k));
                    relaxed = true;
                    if pass == nodes - 1 {
                        cycle_node = Some(v);
                    }
                }
            }
            if !relaxed {
                break;
            }
        }
        let Some(start) = cycle_node else { break };
        let mut v = start;
        for _ in 0..nodes {
            v = pred[v].unwrap().0;
        }
        let mut cycle = Vec::new();
        let mut u = v;
        loop {
            let (p, k) = pred[u].unwrap();
            cycle.push(k);
            u = p;
            if u == v {
                break;
            }
        }
        for &k in &cycle {
            let (u2, v2, _) = arcs[k];
            if u2 < m && v2 >= m && v2 < m + n {
                flow[u2][v2 - m] += 1.0;
            } else if v2 < m && u2 >= m && u2 < m + n {
                flow[v2][u2 - m] -= 1.0;
            } else if u2 == s && v2 < m {
                cap_left[v2] -= 1.0;
            } else if v2 == s && u2 < m {
                cap_left[u2] += 1.0;
            } else if u2 >= m && u2 < m + n && v2 == t {
                vol_left[u2 - m] -= 1.0;
            } else if v2 >= m && v2 < m + n && u2 == t {
                vol_left[v2 - m] += 1.0;
            }
        }
    }

    let served: f64 = vols.iter().sum::<f64>() - vol_left.iter().sum::<f64>();
    let cost = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| flow[i][j] > 0.0 && costs[i][j].is_finite())
        .map(|(i, j)| flow[i][j] * costs[i][j])
        .sum();
    (cost, served)
}

/// Brute-force CFLP oracle: enumerate every open set; the inner assignment
/// comes from the cycle-canceling oracle. Returns the optimal objective, or
/// None when no open set covers the full demand.
pub fn brute_force_cflp(
    caps: &[f64],
    vols: &[f64],
    lat: &[Vec<f64>],
    latency_cap: f64,
    open_cost: f64,
) -> Option<f64> {
    let m = caps.len();
    let total: f64 = vols.iter().sum();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << m) {
        let open: Vec<usize> = (0..m).filter(|f| mask & (1 << f) != 0).collect();
        let costs: Vec<Vec<f64>> = open
            .iter()
            .map(|&f| {
                lat[f]
                    .iter()
                    .map(|&l| if l <= latency_cap { l } else { f64::INFINITY })
                    .collect()
            })
            .collect();
        let sub_caps: Vec<f64> = open.iter().map(|&f| caps[f]).collect();
        let (cost, served) = mincost_assignment_oracle(&costs, &sub_caps, vols);
        if (served - total).abs() > 1e-6 {
            continue;
        }
        let objective = open.len() as f64 * open_cost + cost;
        if best.is_none() || objective < best.unwrap() - 1e-9 {
            best = Some(objective);
        }
    }
    best
}
