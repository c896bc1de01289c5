//! Generalized cone complexes with face identifications and monodromy,
//! their star and barycentric subdivisions, and the rings of piecewise
//! polynomials on them.
//!
//! Cones are simplicial with ordered rays. A point of cone `c` is written
//! `Σ t_k v_k` in the ray coordinates `t_k ≥ 0`, and every polynomial lives in
//! those coordinates. Faces are implicit: any subset of a cone's rays spans a
//! face. All cones share the apex. Further identifications come from the
//! gluing list and from explicit face maps, and are closed under passing to
//! subfaces.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_linalg::{solve_affine, LinearEquation, RowSpace};
use crate::rational::Q;
use crate::stable_graphs::{permutations, subsets_of_size};
use crate::taut_classes::compositions;

/// Largest number of rays a cone may have; faces are bitmasks.
const MAX_RAYS: usize = 16;

/// A face of `cone` spanned by the rays at the listed positions, in order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceRef {
    pub cone: usize,
    pub rays: Vec<usize>,
}

/// Identifies ray `from.rays[t]` with ray `to.rays[t]` for every `t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gluing {
    pub from: FaceRef,
    pub to: FaceRef,
}

/// A simplicial cone. Each face map in `faces` embeds cone `f.cone` with its
/// ray `t` sent to ray `f.rays[t]` of this cone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    pub rays: Vec<Vec<i64>>,
    #[serde(default)]
    pub faces: Vec<FaceRef>,
}

impl Cone {
    pub fn dim(&self) -> usize {
        self.rays.len()
    }
}

#[derive(Deserialize)]
struct RawComplex {
    lattice_rank: usize,
    cones: Vec<Cone>,
    #[serde(default)]
    gluings: Vec<Gluing>,
}

impl TryFrom<RawComplex> for ConeComplex {
    type Error = Error;
    fn try_from(raw: RawComplex) -> Result<Self> {
        ConeComplex::new(raw.lattice_rank, raw.cones, raw.gluings)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawComplex")]
pub struct ConeComplex {
    lattice_rank: usize,
    cones: Vec<Cone>,
    gluings: Vec<Gluing>,
}

fn mask_of(rays: &[usize]) -> u64 {
    rays.iter().fold(0, |m, &r| m | (1 << r))
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

fn det_i128(mut m: Vec<Vec<i128>>) -> i128 {
    // Bareiss elimination.
    let n = m.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if m[k][k] == 0 {
            match (k + 1..n).find(|&i| m[i][k] != 0) {
                Some(p) => {
                    m.swap(k, p);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
        }
        prev = m[k][k];
    }
    if n == 0 {
        1
    } else {
        sign * m[n - 1][n - 1]
    }
}

/// Index of the sublattice spanned by `rays` in its saturation: the gcd of
/// the maximal minors. Zero when the rays are dependent.
fn lattice_index(rays: &[&Vec<i64>], lattice_rank: usize) -> i128 {
    let k = rays.len();
    subsets_of_size(lattice_rank, k).into_iter().fold(0i128, |g, cols| {
        let m = rays
            .iter()
            .map(|r| cols.iter().map(|&c| r[c] as i128).collect())
            .collect();
        g.gcd(&det_i128(m))
    })
}

impl ConeComplex {
    pub fn new(lattice_rank: usize, cones: Vec<Cone>, gluings: Vec<Gluing>) -> Result<Self> {
        fn invalid<T>(s: String) -> Result<T> {
            Err(Error::InvalidComplex(s))
        }
        for (i, c) in cones.iter().enumerate() {
            if c.rays.is_empty() || c.rays.len() > MAX_RAYS {
                return invalid(format!("cone {i} has {} rays", c.rays.len()));
            }
            if c.rays.iter().any(|r| r.len() != lattice_rank) {
                return invalid(format!("cone {i} has a ray outside Z^{lattice_rank}"));
            }
            let refs: Vec<&Vec<i64>> = c.rays.iter().collect();
            if lattice_index(&refs, lattice_rank) == 0 {
                return invalid(format!("cone {i} is not simplicial"));
            }
        }
        let complex = ConeComplex {
            lattice_rank,
            cones,
            gluings,
        };
        let check_face = |f: &FaceRef| -> Result<()> {
            let Some(c) = complex.cones.get(f.cone) else {
                return invalid(format!("face refers to missing cone {}", f.cone));
            };
            if f.rays.iter().any(|&r| r >= c.dim()) || mask_of(&f.rays).count_ones() as usize != f.rays.len() {
                return invalid(format!("bad ray list {:?} for cone {}", f.rays, f.cone));
            }
            Ok(())
        };
        for (i, c) in complex.cones.iter().enumerate() {
            for f in &c.faces {
                check_face(f)?;
                if f.cone == i || complex.cones[f.cone].dim() != f.rays.len() {
                    return invalid(format!("face map of cone {} into cone {i} has the wrong size", f.cone));
                }
                if f.rays.len() >= c.dim() {
                    return invalid(format!("face map of cone {} into cone {i} is not proper", f.cone));
                }
            }
        }
        for (a, b) in complex.identifications() {
            check_face(&a)?;
            check_face(&b)?;
            if a.rays.len() != b.rays.len() {
                return invalid(format!("gluing of faces of different dimension: {a:?} ~ {b:?}"));
            }
            if complex.face_lattice_index(&a) != complex.face_lattice_index(&b) {
                return invalid(format!("gluing {a:?} ~ {b:?} does not preserve the lattice"));
            }
        }
        Ok(complex)
    }

    fn face_lattice_index(&self, f: &FaceRef) -> i128 {
        let c = &self.cones[f.cone];
        let rays: Vec<&Vec<i64>> = f.rays.iter().map(|&r| &c.rays[r]).collect();
        lattice_index(&rays, self.lattice_rank)
    }

    /// The standard cone ℝⁿ≥0 with rays e₁, …, eₙ.
    pub fn simplex(n: usize) -> Result<Self> {
        let rays = (0..n)
            .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
            .collect();
        ConeComplex::new(n, vec![Cone { rays, faces: vec![] }], vec![])
    }

    /// Shipped fixtures: `simplex1` … `simplex5` and `triangle-z3`.
    pub fn fixture(name: &str) -> Result<Self> {
        let text = match name {
            "simplex1" => include_str!("../fixtures/simplex1.json"),
            "simplex2" => include_str!("../fixtures/simplex2.json"),
            "simplex3" => include_str!("../fixtures/simplex3.json"),
            "simplex4" => include_str!("../fixtures/simplex4.json"),
            "simplex5" => include_str!("../fixtures/simplex5.json"),
            "triangle-z3" => include_str!("../fixtures/triangle-z3.json"),
            _ => return Err(Error::Parse(format!("unknown cone fixture {name:?}"))),
        };
        ConeComplex::from_json(text)
    }

    pub fn fixture_names() -> &'static [&'static str] {
        &["simplex1", "simplex2", "simplex3", "simplex4", "simplex5", "triangle-z3"]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("complex serializes")
    }

    pub fn lattice_rank(&self) -> usize {
        self.lattice_rank
    }

    pub fn num_cones(&self) -> usize {
        self.cones.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn cone(&self, i: usize) -> &Cone {
        &self.cones[i]
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    /// Gluings together with face maps, as pairs of identified faces.
    pub fn identifications(&self) -> Vec<(FaceRef, FaceRef)> {
        let mut out: Vec<(FaceRef, FaceRef)> = self.gluings.iter().map(|g| (g.from.clone(), g.to.clone())).collect();
        for (i, c) in self.cones.iter().enumerate() {
            for f in &c.faces {
                let whole = FaceRef {
                    cone: f.cone,
                    rays: (0..self.cones[f.cone].dim()).collect(),
                };
                out.push((whole, FaceRef { cone: i, rays: f.rays.clone() }));
            }
        }
        out
    }

    /// Orbits of nonempty faces under the identification groupoid.
    pub fn face_orbits(&self) -> FaceOrbits {
        let mut index = HashMap::new();
        for (i, c) in self.cones.iter().enumerate() {
            for mask in 1..(1u64 << c.dim()) {
                let next = index.len();
                index.insert((i, mask), next);
            }
        }
        let mut uf = UnionFind::new(index.len());
        for (a, b) in self.identifications() {
            let m = a.rays.len();
            for sub in 1..(1u64 << m) {
                let pa: Vec<usize> = bits(sub).iter().map(|&t| a.rays[t]).collect();
                let pb: Vec<usize> = bits(sub).iter().map(|&t| b.rays[t]).collect();
                uf.union(index[&(a.cone, mask_of(&pa))], index[&(b.cone, mask_of(&pb))]);
            }
        }
        FaceOrbits { index, uf }
    }

    /// Cones that are not identified with a proper face of another cone.
    pub fn maximal_cones(&self) -> Vec<usize> {
        let orbits = self.face_orbits();
        (0..self.cones.len())
            .filter(|&i| {
                let full = (1u64 << self.cones[i].dim()) - 1;
                orbits
                    .orbit(i, full)
                    .iter()
                    .all(|&(j, m)| m.count_ones() as usize == self.cones[j].dim())
            })
            .collect()
    }

    pub fn num_maximal_cones(&self) -> usize {
        self.maximal_cones().len()
    }

    /// Star subdivision at the barycenter of a whole cone.
    pub fn star_subdivision(&self, cone: usize) -> Result<(ConeComplex, SubdivisionMap)> {
        let c = self
            .cones
            .get(cone)
            .ok_or_else(|| Error::InvalidComplex(format!("no cone {cone}")))?;
        self.star_subdivision_at(&FaceRef {
            cone,
            rays: (0..c.dim()).collect(),
        })
    }

    /// Star subdivision at the barycenter of a face, performed uniformly on
    /// the face's orbit. Fails when an orbit meets one cone in two faces.
    pub fn star_subdivision_at(&self, face: &FaceRef) -> Result<(ConeComplex, SubdivisionMap)> {
        let Some(c) = self.cones.get(face.cone) else {
            return Err(Error::InvalidComplex(format!("no cone {}", face.cone)));
        };
        let mask = mask_of(&face.rays);
        if face.rays.is_empty() || face.rays.iter().any(|&r| r >= c.dim()) || mask.count_ones() as usize != face.rays.len() {
            return Err(Error::InvalidComplex(format!("bad face {face:?}")));
        }
        if face.rays.len() == 1 {
            return Ok((self.clone(), SubdivisionMap::identity(self)));
        }
        let mut centre: Vec<Option<u64>> = vec![None; self.cones.len()];
        for (j, m) in self.face_orbits().orbit(face.cone, mask) {
            match centre[j] {
                Some(old) if old != m => {
                    return Err(Error::IncompatibleIdentification(format!(
                        "cone {j} contains two identified faces {:?} and {:?}",
                        bits(old),
                        bits(m)
                    )))
                }
                _ => centre[j] = Some(m),
            }
        }

        let mut cones = Vec::new();
        let mut pieces = Vec::new();
        let mut piece_index: HashMap<(usize, Option<usize>), usize> = HashMap::new();
        for (j, old) in self.cones.iter().enumerate() {
            let k = old.dim();
            let ident: Vec<Vec<i64>> = (0..k).map(|a| (0..k).map(|b| i64::from(a == b)).collect()).collect();
            match centre[j] {
                None => {
                    piece_index.insert((j, None), cones.len());
                    cones.push(Cone {
                        rays: old.rays.clone(),
                        faces: vec![],
                    });
                    pieces.push(Piece { old: j, matrix: ident });
                }
                Some(t) => {
                    let t_rays = bits(t);
                    let bary: Vec<i64> = (0..self.lattice_rank)
                        .map(|x| t_rays.iter().map(|&r| old.rays[r][x]).sum())
                        .collect();
                    for &s in &t_rays {
                        let mut rays = old.rays.clone();
                        rays[s] = bary.clone();
                        let mut matrix = ident.clone();
                        matrix[s] = (0..k).map(|b| i64::from(t >> b & 1 == 1)).collect();
                        piece_index.insert((j, Some(s)), cones.len());
                        cones.push(Cone { rays, faces: vec![] });
                        pieces.push(Piece { old: j, matrix });
                    }
                }
            }
        }

        let mut gluings = Vec::new();
        // Neighbouring pieces of one cone share the barycenter and all rays
        // but the two replaced ones.
        for (j, old) in self.cones.iter().enumerate() {
            let Some(t) = centre[j] else { continue };
            let t_rays = bits(t);
            for (x, &s) in t_rays.iter().enumerate() {
                for &s2 in &t_rays[x + 1..] {
                    let rest: Vec<usize> = (0..old.dim()).filter(|&r| r != s && r != s2).collect();
                    let mut from = vec![s];
                    from.extend(&rest);
                    let mut to = vec![s2];
                    to.extend(&rest);
                    gluings.push(Gluing {
                        from: FaceRef {
                            cone: piece_index[&(j, Some(s))],
                            rays: from,
                        },
                        to: FaceRef {
                            cone: piece_index[&(j, Some(s2))],
                            rays: to,
                        },
                    });
                }
            }
        }
        // Old identifications, carried to the pieces. Ray positions are kept
        // by the pieces, so only the choice of piece varies.
        for (a, b) in self.identifications() {
            let am = mask_of(&a.rays);
            let bm = mask_of(&b.rays);
            let contains = |ti: Option<u64>, m: u64| ti.is_some_and(|t| t & m == t);
            if contains(centre[a.cone], am) != contains(centre[b.cone], bm) {
                return Err(Error::IncompatibleIdentification(format!(
                    "gluing {a:?} ~ {b:?} does not respect the subdivided orbit"
                )));
            }
            if contains(centre[a.cone], am) {
                let t = centre[a.cone].expect("checked");
                for (pos, &s) in a.rays.iter().enumerate() {
                    if t >> s & 1 == 1 {
                        gluings.push(Gluing {
                            from: FaceRef {
                                cone: piece_index[&(a.cone, Some(s))],
                                rays: a.rays.clone(),
                            },
                            to: FaceRef {
                                cone: piece_index[&(b.cone, Some(b.rays[pos]))],
                                rays: b.rays.clone(),
                            },
                        });
                    }
                }
            } else {
                let pick = |cone: usize, m: u64| centre[cone].map(|t| bits(t & !m)[0]);
                gluings.push(Gluing {
                    from: FaceRef {
                        cone: piece_index[&(a.cone, pick(a.cone, am))],
                        rays: a.rays.clone(),
                    },
                    to: FaceRef {
                        cone: piece_index[&(b.cone, pick(b.cone, bm))],
                        rays: b.rays.clone(),
                    },
                });
            }
        }
        let complex = ConeComplex::new(self.lattice_rank, cones, gluings)?;
        Ok((complex, SubdivisionMap { pieces }))
    }

    /// Barycentric subdivision: one cone per ordering of each cone's rays,
    /// spanned by the barycenters of the faces of the corresponding flag.
    pub fn barycentric(&self) -> Result<(ConeComplex, SubdivisionMap)> {
        let mut cones = Vec::new();
        let mut pieces = Vec::new();
        let mut flag_index: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut orders_by_cone = Vec::new();
        for (i, old) in self.cones.iter().enumerate() {
            let k = old.dim();
            let mut orders = permutations(k);
            orders.sort();
            for alpha in &orders {
                let mut matrix = Vec::with_capacity(k);
                let mut row = vec![0i64; k];
                for &r in alpha {
                    row[r] = 1;
                    matrix.push(row.clone());
                }
                let rays = matrix
                    .iter()
                    .map(|m| {
                        (0..self.lattice_rank)
                            .map(|x| (0..k).map(|r| m[r] * old.rays[r][x]).sum())
                            .collect()
                    })
                    .collect();
                flag_index.insert((i, alpha.clone()), cones.len());
                cones.push(Cone { rays, faces: vec![] });
                pieces.push(Piece { old: i, matrix });
            }
            orders_by_cone.push(orders);
        }

        let mut gluings = Vec::new();
        // Two flags of one cone share the positions where their chains agree.
        for (i, orders) in orders_by_cone.iter().enumerate() {
            for (x, alpha) in orders.iter().enumerate() {
                for beta in &orders[x + 1..] {
                    let common: Vec<usize> = (0..alpha.len())
                        .filter(|&p| mask_of(&alpha[..=p]) == mask_of(&beta[..=p]))
                        .collect();
                    if !common.is_empty() {
                        gluings.push(Gluing {
                            from: FaceRef {
                                cone: flag_index[&(i, alpha.clone())],
                                rays: common.clone(),
                            },
                            to: FaceRef {
                                cone: flag_index[&(i, beta.clone())],
                                rays: common,
                            },
                        });
                    }
                }
            }
        }
        // A flag in an identified face extends to a flag of each cone.
        let extend = |cone: usize, head: Vec<usize>| {
            let m = mask_of(&head);
            let mut full = head;
            full.extend((0..self.cones[cone].dim()).filter(|&r| m >> r & 1 == 0));
            full
        };
        for (a, b) in self.identifications() {
            let m = a.rays.len();
            for gamma in permutations(m) {
                let fa = extend(a.cone, gamma.iter().map(|&t| a.rays[t]).collect());
                let fb = extend(b.cone, gamma.iter().map(|&t| b.rays[t]).collect());
                gluings.push(Gluing {
                    from: FaceRef {
                        cone: flag_index[&(a.cone, fa)],
                        rays: (0..m).collect(),
                    },
                    to: FaceRef {
                        cone: flag_index[&(b.cone, fb)],
                        rays: (0..m).collect(),
                    },
                });
            }
        }
        let complex = ConeComplex::new(self.lattice_rank, cones, gluings)?;
        Ok((complex, SubdivisionMap { pieces }))
    }

    /// Whether `f` agrees with itself under every identification.
    pub fn is_pp(&self, f: &PPFunction) -> bool {
        if f.pieces.len() != self.cones.len() {
            return false;
        }
        if f.degree == 0 {
            let c0 = f.pieces[0].get(&vec![0; self.cones[0].dim()]).cloned().unwrap_or_default();
            let all_equal = f
                .pieces
                .iter()
                .zip(&self.cones)
                .all(|(p, c)| p.get(&vec![0; c.dim()]).cloned().unwrap_or_default() == c0);
            if !all_equal {
                return false;
            }
        }
        self.identifications()
            .iter()
            .all(|(a, b)| restrict(&f.pieces[a.cone], &a.rays) == restrict(&f.pieces[b.cone], &b.rays))
    }

    /// The degree-`d` piecewise polynomials. Every compatibility condition
    /// equates two monomial coefficients, so the space has a basis indexed by
    /// the classes of the generated equivalence relation.
    pub fn pp_space(&self, d: u32) -> PPSpace {
        let mut index: HashMap<(usize, Vec<u32>), usize> = HashMap::new();
        let mut vars = Vec::new();
        for (i, c) in self.cones.iter().enumerate() {
            for m in compositions(d, c.dim()) {
                index.insert((i, m.clone()), vars.len());
                vars.push((i, m));
            }
        }
        let mut uf = UnionFind::new(vars.len());
        if d == 0 {
            for i in 1..self.cones.len() {
                uf.union(index[&(0, vec![0; self.cones[0].dim()])], index[&(i, vec![0; self.cones[i].dim()])]);
            }
        }
        for (a, b) in self.identifications() {
            for m in compositions(d, a.rays.len()) {
                let lift = |f: &FaceRef| {
                    let mut e = vec![0; self.cones[f.cone].dim()];
                    for (t, &r) in f.rays.iter().enumerate() {
                        e[r] = m[t];
                    }
                    index[&(f.cone, e)]
                };
                uf.union(lift(&a), lift(&b));
            }
        }
        let mut classes: BTreeMap<usize, Vec<(usize, Vec<u32>)>> = BTreeMap::new();
        for (x, v) in vars.into_iter().enumerate() {
            classes.entry(uf.find(x)).or_default().push(v);
        }
        let mut classes: Vec<Vec<(usize, Vec<u32>)>> = classes.into_values().collect();
        classes.sort();
        PPSpace {
            degree: d,
            num_cones: self.cones.len(),
            classes,
        }
    }

    /// Whether products of degree-one piecewise polynomials span the degree-`d`
    /// ones.
    pub fn generated_by_degree_one(&self, d: u32) -> bool {
        if d <= 1 {
            return true;
        }
        let target = self.pp_space(d);
        if target.dimension() == 0 {
            return true;
        }
        let ones = self.pp_space(1).basis();
        let mut span = RowSpace::new(target.dimension());
        let mut found = false;
        for_each_multiset(ones.len(), d as usize, &mut |idx| {
            if found {
                return;
            }
            let mut prod = ones[idx[0]].clone();
            for &i in &idx[1..] {
                prod = prod.mul(&ones[i]);
            }
            let coords = target.coordinates(&prod).expect("products of piecewise polynomials are piecewise polynomial");
            span.insert(&coords).expect("width matches");
            found = span.rank() == target.dimension();
        });
        found
    }
}

fn for_each_multiset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Union-find over the nonempty faces `(cone, ray bitmask)`.
pub struct FaceOrbits {
    index: HashMap<(usize, u64), usize>,
    uf: UnionFind<usize>,
}

impl FaceOrbits {
    pub fn same(&self, a: (usize, u64), b: (usize, u64)) -> bool {
        self.uf.equiv(self.index[&a], self.index[&b])
    }

    /// All faces identified with `(cone, mask)`, sorted.
    pub fn orbit(&self, cone: usize, mask: u64) -> Vec<(usize, u64)> {
        let root = self.uf.find(self.index[&(cone, mask)]);
        let mut out: Vec<(usize, u64)> = self
            .index
            .iter()
            .filter(|(_, &x)| self.uf.find(x) == root)
            .map(|(&k, _)| k)
            .collect();
        out.sort_unstable();
        out
    }

    pub fn num_orbits(&self) -> usize {
        let mut roots: Vec<usize> = self.index.values().map(|&x| self.uf.find(x)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

/// New cone lies in cone `old` of the coarser complex; its ray `k` is
/// `Σ_i matrix[k][i] · (old ray i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub old: usize,
    pub matrix: Vec<Vec<i64>>,
}

/// A subdivision, recorded cone by cone of the finer complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubdivisionMap {
    pub pieces: Vec<Piece>,
}

impl SubdivisionMap {
    pub fn identity(complex: &ConeComplex) -> Self {
        SubdivisionMap {
            pieces: complex
                .cones
                .iter()
                .enumerate()
                .map(|(i, c)| Piece {
                    old: i,
                    matrix: (0..c.dim()).map(|a| (0..c.dim()).map(|b| i64::from(a == b)).collect()).collect(),
                })
                .collect(),
        }
    }

    /// `self` subdivides A into B, `finer` subdivides B into C; the result
    /// subdivides A into C.
    pub fn then(&self, finer: &SubdivisionMap) -> SubdivisionMap {
        SubdivisionMap {
            pieces: finer
                .pieces
                .iter()
                .map(|p| {
                    let mid = &self.pieces[p.old];
                    let cols = mid.matrix.first().map_or(0, Vec::len);
                    let matrix = p
                        .matrix
                        .iter()
                        .map(|row| {
                            (0..cols)
                                .map(|i| row.iter().zip(&mid.matrix).map(|(a, m)| a * m[i]).sum())
                                .collect()
                        })
                        .collect();
                    Piece { old: mid.old, matrix }
                })
                .collect(),
        }
    }

    /// Old ray coordinates of a point given in the coordinates of new cone `c`.
    pub fn to_old(&self, c: usize, t: &[Q]) -> Vec<Q> {
        let m = &self.pieces[c].matrix;
        let cols = m.first().map_or(0, Vec::len);
        (0..cols)
            .map(|i| {
                m.iter()
                    .zip(t)
                    .fold(Q::zero(), |acc, (row, tk)| acc + tk * Q::from_integer(row[i].into()))
            })
            .collect()
    }

    /// A new cone containing the point with old coordinates `t` in cone `old`,
    /// with the point's coordinates there.
    pub fn locate(&self, old: usize, t: &[Q]) -> Option<(usize, Vec<Q>)> {
        self.pieces.iter().enumerate().filter(|(_, p)| p.old == old).find_map(|(c, p)| {
            let k = p.matrix.len();
            let system: Vec<LinearEquation> = (0..t.len())
                .map(|i| LinearEquation {
                    coeffs: p.matrix.iter().map(|row| Q::from_integer(row[i].into())).collect(),
                    rhs: t[i].clone(),
                })
                .collect();
            let names: Vec<String> = (0..k).map(|x| format!("t{x}")).collect();
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            let sol = solve_affine(&system, &names).ok()??;
            (sol.dimension() == 0 && sol.particular.iter().all(|x| !x.is_negative())).then_some((c, sol.particular))
        })
    }
}

/// Polynomial in ray coordinates, keyed by exponent vector.
pub type Poly = BTreeMap<Vec<u32>, Q>;

fn poly_add_term(p: &mut Poly, e: Vec<u32>, c: Q) {
    if c.is_zero() {
        return;
    }
    let entry = p.entry(e.clone()).or_insert_with(Q::zero);
    *entry += c;
    if entry.is_zero() {
        p.remove(&e);
    }
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            poly_add_term(&mut out, e, ca * cb);
        }
    }
    out
}

/// Part of `p` supported on the given positions, in the face's own variables.
fn restrict(p: &Poly, positions: &[usize]) -> Poly {
    let mask = mask_of(positions);
    p.iter()
        .filter(|(e, _)| e.iter().enumerate().all(|(i, &x)| x == 0 || mask >> i & 1 == 1))
        .map(|(e, c)| (positions.iter().map(|&r| e[r]).collect(), c.clone()))
        .collect()
}

/// Substitutes `x_i = Σ_k forms[i][k] · t_k` into a polynomial in the `x_i`.
fn substitute(p: &Poly, forms: &[Vec<Q>], nvars: usize) -> Poly {
    let linear: Vec<Poly> = forms
        .iter()
        .map(|f| {
            let mut l = Poly::new();
            for (k, c) in f.iter().enumerate() {
                let mut e = vec![0; nvars];
                e[k] = 1;
                poly_add_term(&mut l, e, c.clone());
            }
            l
        })
        .collect();
    let mut out = Poly::new();
    for (e, c) in p {
        let mut term = Poly::from([(vec![0; nvars], c.clone())]);
        for (i, &k) in e.iter().enumerate() {
            for _ in 0..k {
                term = poly_mul(&term, &linear[i]);
            }
        }
        for (e2, c2) in term {
            poly_add_term(&mut out, e2, c2);
        }
    }
    out
}

fn eval_poly(p: &Poly, t: &[Q]) -> Q {
    p.iter().fold(Q::zero(), |acc, (e, c)| {
        acc + e
            .iter()
            .zip(t)
            .fold(c.clone(), |m, (&k, x)| m * crate::rational::pow_q(x, k))
    })
}

/// Homogeneous polynomial of degree `degree` on every cone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PPFunction {
    degree: u32,
    pieces: Vec<Poly>,
}

impl PPFunction {
    pub fn from_pieces(degree: u32, pieces: Vec<Poly>) -> Result<Self> {
        for p in &pieces {
            if p.keys().any(|e| e.iter().sum::<u32>() != degree) {
                return Err(Error::DegreeMismatch(degree, p.keys().map(|e| e.iter().sum()).max().unwrap_or(0)));
            }
        }
        let pieces = pieces
            .into_iter()
            .map(|p| p.into_iter().filter(|(_, c)| !c.is_zero()).collect())
            .collect();
        Ok(PPFunction { degree, pieces })
    }

    pub fn zero(complex: &ConeComplex, degree: u32) -> Self {
        PPFunction {
            degree,
            pieces: vec![Poly::new(); complex.num_cones()],
        }
    }

    pub fn constant(complex: &ConeComplex, c: Q) -> Self {
        PPFunction {
            degree: 0,
            pieces: complex
                .cones
                .iter()
                .map(|cone| {
                    let mut p = Poly::new();
                    poly_add_term(&mut p, vec![0; cone.dim()], c.clone());
                    p
                })
                .collect(),
        }
    }

    /// Restriction of a homogeneous polynomial in the lattice coordinates.
    /// Only piecewise polynomial when the gluings respect those coordinates.
    pub fn from_global(complex: &ConeComplex, poly: &Poly) -> Result<Self> {
        let degree = poly.keys().next().map_or(0, |e| e.iter().sum());
        let pieces = complex
            .cones
            .iter()
            .map(|c| {
                let forms: Vec<Vec<Q>> = (0..complex.lattice_rank)
                    .map(|x| c.rays.iter().map(|r| Q::from_integer(r[x].into())).collect())
                    .collect();
                substitute(poly, &forms, c.dim())
            })
            .collect();
        PPFunction::from_pieces(degree, pieces)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn pieces(&self) -> &[Poly] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Poly::is_empty)
    }

    pub fn add(&self, other: &PPFunction) -> Result<PPFunction> {
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch(self.degree, other.degree));
        }
        if self.pieces.len() != other.pieces.len() {
            return Err(Error::WidthMismatch(self.pieces.len(), other.pieces.len()));
        }
        let pieces = self
            .pieces
            .iter()
            .zip(&other.pieces)
            .map(|(a, b)| {
                let mut p = a.clone();
                for (e, c) in b {
                    poly_add_term(&mut p, e.clone(), c.clone());
                }
                p
            })
            .collect();
        Ok(PPFunction {
            degree: self.degree,
            pieces,
        })
    }

    pub fn scale(&self, c: &Q) -> PPFunction {
        PPFunction {
            degree: self.degree,
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|(e, x)| (e.clone(), x * c)).filter(|(_, x)| !x.is_zero()).collect())
                .collect(),
        }
    }

    pub fn mul(&self, other: &PPFunction) -> PPFunction {
        PPFunction {
            degree: self.degree + other.degree,
            pieces: self.pieces.iter().zip(&other.pieces).map(|(a, b)| poly_mul(a, b)).collect(),
        }
    }

    /// Value at the point with ray coordinates `t` in cone `cone`.
    pub fn evaluate(&self, cone: usize, t: &[Q]) -> Q {
        eval_poly(&self.pieces[cone], t)
    }
}

/// Pulls a piecewise polynomial back along a subdivision.
pub fn pullback_pp(map: &SubdivisionMap, f: &PPFunction) -> PPFunction {
    PPFunction {
        degree: f.degree,
        pieces: map
            .pieces
            .iter()
            .map(|p| {
                let cols = p.matrix.first().map_or(0, Vec::len);
                let forms: Vec<Vec<Q>> = (0..cols)
                    .map(|i| p.matrix.iter().map(|row| Q::from_integer(row[i].into())).collect())
                    .collect();
                substitute(&f.pieces[p.old], &forms, p.matrix.len())
            })
            .collect(),
    }
}

/// Basis of the degree-`d` piecewise polynomials: basis vector `x` has
/// coefficient one on each `(cone, monomial)` of `classes[x]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PPSpace {
    degree: u32,
    num_cones: usize,
    classes: Vec<Vec<(usize, Vec<u32>)>>,
}

impl PPSpace {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dimension(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[Vec<(usize, Vec<u32>)>] {
        &self.classes
    }

    pub fn basis(&self) -> Vec<PPFunction> {
        self.classes
            .iter()
            .map(|class| {
                let mut pieces = vec![Poly::new(); self.num_cones];
                for (c, e) in class {
                    pieces[*c].insert(e.clone(), Q::one());
                }
                PPFunction {
                    degree: self.degree,
                    pieces,
                }
            })
            .collect()
    }

    /// Coordinates of `f` in the basis, or `None` if `f` is not in the space.
    pub fn coordinates(&self, f: &PPFunction) -> Option<Vec<Q>> {
        if f.degree != self.degree || f.pieces.len() != self.num_cones {
            return None;
        }
        let coeff = |c: usize, e: &Vec<u32>| f.pieces[c].get(e).cloned().unwrap_or_default();
        let mut out = Vec::with_capacity(self.classes.len());
        let mut seen = 0;
        for class in &self.classes {
            let x = coeff(class[0].0, &class[0].1);
            if class.iter().any(|(c, e)| coeff(*c, e) != x) {
                return None;
            }
            seen += class.iter().filter(|(c, e)| f.pieces[*c].contains_key(e)).count();
            out.push(x);
        }
        let total: usize = f.pieces.iter().map(BTreeMap::len).sum();
        (seen == total).then_some(out)
    }
}

fn elementary_symmetric(fs: &[PPFunction], k: usize, complex: &ConeComplex) -> PPFunction {
    let mut acc = PPFunction::zero(complex, k as u32);
    for subset in subsets_of_size(fs.len(), k) {
        let mut prod = PPFunction::constant(complex, Q::one());
        for &i in &subset {
            prod = prod.mul(&fs[i]);
        }
        acc = acc.add(&prod).expect("same degree and cones");
    }
    acc
}

/// Outcome of the explosion check on the barycentric subdivision of ℝˢ≥0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExplosionReport {
    pub s: usize,
    pub k: usize,
    /// Every `l_j` is compatible across faces.
    pub roots_are_piecewise_linear: bool,
    /// `σ_k(l_0, …, l_{s-1})` equals the pullback of `σ_k(x_1, …, x_s)`.
    pub identity_holds: bool,
}

impl ExplosionReport {
    pub fn holds(&self) -> bool {
        self.roots_are_piecewise_linear && self.identity_holds
    }
}

/// On the flag cone of an ordering `γ` of the rays of ℝˢ≥0, `l_j` is the
/// coordinate `x_{γ(j)}`. Checks that these glue and that their elementary
/// symmetric functions are the global ones.
pub fn explosion_chern_identity(s: usize, k: usize) -> Result<ExplosionReport> {
    if s == 0 || s > 5 || k == 0 || k > s {
        return Err(Error::DegreeOutOfRange {
            degree: k as u32,
            max: s.min(5) as u32,
        });
    }
    let base = ConeComplex::simplex(s)?;
    let (sub, map) = base.barycentric()?;
    let roots: Vec<PPFunction> = (0..s)
        .map(|j| {
            let pieces = map
                .pieces
                .iter()
                .map(|p| {
                    // The ray entering the flag at step j.
                    let gamma_j = (0..s)
                        .find(|&i| p.matrix[j][i] == 1 && (j == 0 || p.matrix[j - 1][i] == 0))
                        .expect("flag matrix");
                    let mut l = Poly::new();
                    for (pos, row) in p.matrix.iter().enumerate() {
                        let mut e = vec![0; s];
                        e[pos] = 1;
                        poly_add_term(&mut l, e, Q::from_integer(row[gamma_j].into()));
                    }
                    l
                })
                .collect();
            PPFunction { degree: 1, pieces }
        })
        .collect();
    let roots_are_piecewise_linear = roots.iter().all(|l| sub.is_pp(l));
    let lhs = elementary_symmetric(&roots, k, &sub);
    let mut global = Poly::new();
    for subset in subsets_of_size(s, k) {
        let mut e = vec![0; s];
        for i in subset {
            e[i] = 1;
        }
        global.insert(e, Q::one());
    }
    let rhs = pullback_pp(&map, &PPFunction::from_global(&base, &global)?);
    Ok(ExplosionReport {
        s,
        k,
        roots_are_piecewise_linear,
        identity_holds: lhs == rhs && sub.is_pp(&lhs),
    })
}
