//! Line-oriented text format.
//!
//! ```text
//! # comment
//! vertices <n> <dim>        dim ∈ {0, 2, 3}
//! <index> [x y [z]]
//! faces <m>
//! <i> <j> <k>
//! loops <k>
//! <count> <v0> <v1> ...
//! edge_lengths <e>          optional
//! <i> <j> <length>
//! ```
//!
//! Floats are written in shortest round-trip form, so write→read is exact.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{EdgeLengths, MeshError, Positions, TriMesh};

pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let dim = mesh.positions().map_or(0, |p| p.dim);
    writeln!(s, "vertices {} {}", mesh.vertex_count(), dim).unwrap();
    for v in 0..mesh.vertex_count() {
        write!(s, "{v}").unwrap();
        if let Some(p) = mesh.positions() {
            for x in &p.coords[v][..p.dim] {
                write!(s, " {x:?}").unwrap();
            }
        }
        s.push('\n');
    }
    writeln!(s, "faces {}", mesh.face_count()).unwrap();
    for f in mesh.faces() {
        writeln!(s, "{} {} {}", f[0], f[1], f[2]).unwrap();
    }
    writeln!(s, "loops {}", mesh.loop_count()).unwrap();
    for lp in mesh.loops() {
        write!(s, "{}", lp.len()).unwrap();
        for v in lp {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "edge_lengths {}", mesh.edge_count()).unwrap();
    for (&[a, b], l) in mesh.edges().iter().zip(mesh.edge_lengths()) {
        writeln!(s, "{a} {b} {l:?}").unwrap();
    }
    s
}

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    mesh_from_str(&std::fs::read_to_string(path)?)
}

/// Non-blank lines as (line number, tokens).
type TokenLines<'a> = Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>;

struct Lines<'a> {
    inner: std::iter::Peekable<TokenLines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, Vec<&'a str>)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
                .map(|(i, l)| (i, l.split_whitespace().collect::<Vec<_>>()))
                .filter(|(_, t)| !t.is_empty()),
        );
        Self {
            inner: it.peekable(),
            last: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        match self.inner.next() {
            Some((i, t)) => {
                self.last = i;
                Ok((i, t))
            }
            None => Err(MeshError::Parse {
                line: self.last + 1,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn peek_keyword(&mut self) -> Option<&'a str> {
        self.inner.peek().map(|(_, t)| t[0])
    }
}

fn parse<T: FromStr>(line: usize, tok: &str, what: &str) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("cannot parse {what} from {tok:?}"),
    })
}

fn header(lines: &mut Lines, keyword: &str, extra: usize) -> Result<(usize, Vec<usize>), MeshError> {
    let (line, t) = lines.next(&format!("`{keyword}` section"))?;
    if t[0] != keyword || t.len() != 2 + extra {
        return Err(MeshError::Parse {
            line,
            message: format!(
                "expected `{keyword}` header with {} count(s), found {:?}",
                1 + extra,
                t.join(" ")
            ),
        });
    }
    let nums = t[1..]
        .iter()
        .map(|s| parse(line, s, "count"))
        .collect::<Result<_, _>>()?;
    Ok((line, nums))
}

fn expect_len(line: usize, t: &[&str], n: usize, what: &str) -> Result<(), MeshError> {
    if t.len() != n {
        return Err(MeshError::Parse {
            line,
            message: format!("{what} line needs {n} fields, found {}", t.len()),
        });
    }
    Ok(())
}

pub fn mesh_from_str(text: &str) -> Result<TriMesh, MeshError> {
    let mut lines = Lines::new(text);

    let (hline, h) = header(&mut lines, "vertices", 1)?;
    let (n, dim) = (h[0], h[1]);
    if ![0, 2, 3].contains(&dim) {
        return Err(MeshError::Parse {
            line: hline,
            message: format!("vertex dimension must be 0, 2 or 3, found {dim}"),
        });
    }
    let mut coords = Vec::with_capacity(if dim > 0 { n } else { 0 });
    for expected in 0..n {
        let (line, t) = lines.next("vertex line")?;
        expect_len(line, &t, 1 + dim, "vertex")?;
        let idx: usize = parse(line, t[0], "vertex index")?;
        if idx != expected {
            return Err(MeshError::Parse {
                line,
                message: format!("vertex index {idx} out of order (expected {expected})"),
            });
        }
        if dim > 0 {
            let mut c = [0.0; 3];
            for k in 0..dim {
                c[k] = parse(line, t[1 + k], "coordinate")?;
            }
            coords.push(c);
        }
    }

    let (_, h) = header(&mut lines, "faces", 0)?;
    let mut faces = Vec::with_capacity(h[0]);
    for f in 0..h[0] {
        let (line, t) = lines.next("face line")?;
        expect_len(line, &t, 3, "face")?;
        let mut face = [0usize; 3];
        for k in 0..3 {
            face[k] = parse(line, t[k], &format!("vertex index of face {f}"))?;
        }
        faces.push(face);
    }

    let (_, h) = header(&mut lines, "loops", 0)?;
    let mut loops = Vec::with_capacity(h[0]);
    for i in 0..h[0] {
        let (line, t) = lines.next("loop line")?;
        let count: usize = parse(line, t[0], &format!("vertex count of loop {i}"))?;
        expect_len(line, &t, 1 + count, "loop")?;
        let lp = t[1..]
            .iter()
            .map(|s| parse(line, s, &format!("vertex index of loop {i}")))
            .collect::<Result<Vec<usize>, _>>()?;
        loops.push(lp);
    }

    let lengths = if lines.peek_keyword() == Some("edge_lengths") {
        let (_, h) = header(&mut lines, "edge_lengths", 0)?;
        let mut list = Vec::with_capacity(h[0]);
        for _ in 0..h[0] {
            let (line, t) = lines.next("edge length line")?;
            expect_len(line, &t, 3, "edge length")?;
            let a = parse(line, t[0], "edge endpoint")?;
            let b = parse(line, t[1], "edge endpoint")?;
            let l = parse(line, t[2], "edge length")?;
            list.push(([a, b], l));
        }
        EdgeLengths::Explicit(list)
    } else {
        EdgeLengths::FromPositions
    };

    if let Some((line, t)) = lines.inner.next() {
        return Err(MeshError::Parse {
            line,
            message: format!("unexpected content {:?}", t.join(" ")),
        });
    }

    let positions = (dim > 0).then_some(Positions { dim, coords });
    TriMesh::new(n, positions, faces, loops, lengths)
}
