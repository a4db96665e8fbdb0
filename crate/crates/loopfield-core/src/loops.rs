//! Lattice bonds, loops as reduced cyclic words, strings, and the word
//! surgeries that generate master loop equation terms.
//!
//! Coordinates are integers in units of the lattice spacing. A loop stores its
//! canonical word, the least rotation of the reduced cyclic word, and all
//! locations index into that canonical word.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    R,
    U,
    L,
    D,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::R, Dir::U, Dir::L, Dir::D];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir::R => (1, 0),
            Dir::U => (0, 1),
            Dir::L => (-1, 0),
            Dir::D => (0, -1),
        }
    }

    pub fn reverse(self) -> Dir {
        match self {
            Dir::R => Dir::L,
            Dir::U => Dir::D,
            Dir::L => Dir::R,
            Dir::D => Dir::U,
        }
    }

    pub fn left(self) -> Dir {
        match self {
            Dir::R => Dir::U,
            Dir::U => Dir::L,
            Dir::L => Dir::D,
            Dir::D => Dir::R,
        }
    }

    pub fn right(self) -> Dir {
        self.left().reverse()
    }

    pub fn letter(self) -> char {
        match self {
            Dir::R => 'R',
            Dir::U => 'U',
            Dir::L => 'L',
            Dir::D => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<Dir> {
        match c {
            'R' => Some(Dir::R),
            'U' => Some(Dir::U),
            'L' => Some(Dir::L),
            'D' => Some(Dir::D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bond {
    pub x: i32,
    pub y: i32,
    pub dir: Dir,
}

impl Bond {
    pub fn new(x: i32, y: i32, dir: Dir) -> Self {
        Bond { x, y, dir }
    }

    pub fn start(&self) -> (i32, i32) {
        (self.x, self.y)
    }

    pub fn end(&self) -> (i32, i32) {
        let (dx, dy) = self.dir.delta();
        (self.x + dx, self.y + dy)
    }

    pub fn inverse(&self) -> Bond {
        let (x, y) = self.end();
        Bond { x, y, dir: self.dir.reverse() }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self.dir, Dir::R | Dir::U)
    }

    /// The positively oriented representative and whether `self` is it.
    pub fn positive(&self) -> (Bond, bool) {
        if self.is_positive() {
            (*self, true)
        } else {
            (self.inverse(), false)
        }
    }

    /// Unit square on the given side of the bond, traversed starting with the bond.
    pub fn plaquette_word(&self, side: Side) -> [Bond; 4] {
        let mut out = [*self; 4];
        let mut cur = *self;
        for slot in out.iter_mut().skip(1) {
            let (x, y) = cur.end();
            let dir = match side {
                Side::Left => cur.dir.left(),
                Side::Right => cur.dir.right(),
            };
            cur = Bond { x, y, dir };
            *slot = cur;
        }
        out
    }

    /// Lower-left corner of the unit cell on the given side.
    pub fn cell(&self, side: Side) -> (i32, i32) {
        let w = self.plaquette_word(side);
        let xs = w.iter().map(|b| b.x).min().unwrap_or(self.x);
        let ys = w.iter().map(|b| b.y).min().unwrap_or(self.y);
        (xs, ys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopError {
    Empty,
    NotAdjacent(usize),
    NotClosed,
    ErasesToEmpty,
    LocationOutOfRange(usize),
    LocationMismatch,
    Parse(String),
}

impl fmt::Display for LoopError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopError::Empty => write!(f, "empty word"),
            LoopError::NotAdjacent(i) => write!(f, "bonds {} and {} are not adjacent", i, i + 1),
            LoopError::NotClosed => write!(f, "word is not closed"),
            LoopError::ErasesToEmpty => write!(f, "word erases to the empty loop"),
            LoopError::LocationOutOfRange(i) => write!(f, "location {i} out of range"),
            LoopError::LocationMismatch => write!(f, "bond does not match at the given location"),
            LoopError::Parse(s) => write!(f, "cannot parse loop: {s}"),
        }
    }
}

/// Unit square with lower-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Plaquette {
    pub x: i32,
    pub y: i32,
}

impl Plaquette {
    /// Word whose first bond starts at the lexicographically smallest corner
    /// and ends at the second smallest.
    pub fn word(&self) -> [Bond; 4] {
        Bond::new(self.x, self.y, Dir::U).plaquette_word(Side::Right)
    }

    pub fn ccw_word(&self) -> [Bond; 4] {
        Bond::new(self.x, self.y, Dir::R).plaquette_word(Side::Left)
    }
}

/// Index of the lexicographically least rotation.
pub fn least_rotation<T: Ord>(s: &[T]) -> usize {
    let n = s.len();
    if n == 0 {
        return 0;
    }
    let (mut i, mut j, mut k) = (0usize, 1usize, 0usize);
    while i < n && j < n && k < n {
        let a = &s[(i + k) % n];
        let b = &s[(j + k) % n];
        match a.cmp(b) {
            core::cmp::Ordering::Equal => k += 1,
            core::cmp::Ordering::Greater => {
                i += k + 1;
                if i <= j {
                    i = j + 1;
                }
                k = 0;
            }
            core::cmp::Ordering::Less => {
                j += k + 1;
                if j <= i {
                    j = i + 1;
                }
                k = 0;
            }
        }
    }
    i.min(j)
}

pub fn check_closed_path(word: &[Bond]) -> Result<(), LoopError> {
    if word.is_empty() {
        return Err(LoopError::Empty);
    }
    for i in 0..word.len() - 1 {
        if word[i].end() != word[i + 1].start() {
            return Err(LoopError::NotAdjacent(i));
        }
    }
    if word[word.len() - 1].end() != word[0].start() {
        return Err(LoopError::NotClosed);
    }
    Ok(())
}

/// Free reduction followed by cyclic reduction.
pub fn reduce_cyclic(word: &[Bond]) -> Vec<Bond> {
    let mut stack: Vec<Bond> = Vec::with_capacity(word.len());
    for b in word {
        if stack.last() == Some(&b.inverse()) {
            stack.pop();
        } else {
            stack.push(*b);
        }
    }
    let mut lo = 0;
    let mut hi = stack.len();
    while hi - lo >= 2 && stack[lo] == stack[hi - 1].inverse() {
        lo += 1;
        hi -= 1;
    }
    stack[lo..hi].to_vec()
}

pub fn invert_word(word: &[Bond]) -> Vec<Bond> {
    word.iter().rev().map(Bond::inverse).collect()
}

fn rotated(word: &[Bond], start: usize) -> Vec<Bond> {
    let n = word.len();
    (0..n).map(|i| word[(start + i) % n]).collect()
}

/// Cyclic slice `word[from..to)` with indices taken modulo the length.
fn cyclic_slice(word: &[Bond], from: usize, to: usize) -> Vec<Bond> {
    let n = word.len();
    let len = (to + n - from % n) % n;
    (0..len).map(|i| word[(from + i) % n]).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loop {
    word: Vec<Bond>,
}

impl Loop {
    pub fn trivial() -> Self {
        Loop { word: Vec::new() }
    }

    /// Builds a non-trivial loop from a closed path.
    pub fn make_loop(raw: &[Bond]) -> Result<Loop, LoopError> {
        let l = Loop::from_path(raw)?;
        if l.is_trivial() {
            Err(LoopError::ErasesToEmpty)
        } else {
            Ok(l)
        }
    }

    /// Like [`Loop::make_loop`] but a path erasing to nothing gives the trivial loop.
    pub fn from_path(raw: &[Bond]) -> Result<Loop, LoopError> {
        check_closed_path(raw)?;
        Ok(Loop::from_closed_unchecked(raw))
    }

    fn from_closed_unchecked(raw: &[Bond]) -> Loop {
        let reduced = reduce_cyclic(raw);
        let r = least_rotation(&reduced);
        Loop { word: rotated(&reduced, r) }
    }

    /// For a path that is already reduced, the loop and the rotation offset:
    /// raw index `i` sits at canonical index `(i + len - offset) % len`.
    pub fn from_reduced_path(raw: &[Bond]) -> Result<(Loop, usize), LoopError> {
        check_closed_path(raw)?;
        if reduce_cyclic(raw).len() != raw.len() {
            return Err(LoopError::Parse(String::from("path has backtracking")));
        }
        let r = least_rotation(raw);
        Ok((Loop { word: rotated(raw, r) }, r))
    }

    pub fn word(&self) -> &[Bond] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.word.is_empty()
    }

    pub fn inverse(&self) -> Loop {
        if self.is_trivial() {
            return Loop::trivial();
        }
        Loop::from_closed_unchecked(&invert_word(&self.word))
    }

    pub fn bond(&self, x: usize) -> Result<Bond, LoopError> {
        self.word.get(x).copied().ok_or(LoopError::LocationOutOfRange(x))
    }

    /// Every location holding `e` or `e^-1`, with `true` for the same orientation.
    pub fn occurrences(&self, e: Bond) -> Vec<(usize, bool)> {
        let inv = e.inverse();
        self.word
            .iter()
            .enumerate()
            .filter_map(|(i, b)| {
                if *b == e {
                    Some((i, true))
                } else if *b == inv {
                    Some((i, false))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Canonical word rotated so that location `x` comes first.
    pub fn rotated_at(&self, x: usize) -> Vec<Bond> {
        rotated(&self.word, x)
    }

    /// Number of times each bond (positively oriented) is traversed, signed.
    pub fn bond_multiplicity(&self) -> Vec<(Bond, i32)> {
        let mut out: Vec<(Bond, i32)> = Vec::new();
        for b in &self.word {
            let (p, pos) = b.positive();
            let s = if pos { 1 } else { -1 };
            match out.iter_mut().find(|(q, _)| *q == p) {
                Some(entry) => entry.1 += s,
                None => out.push((p, s)),
            }
        }
        out
    }

    pub fn bounding_box(&self) -> Option<(i32, i32, i32, i32)> {
        let mut it = self.word.iter();
        let first = it.next()?;
        let (mut x0, mut y0) = first.start();
        let (mut x1, mut y1) = (x0, y0);
        for b in self.word.iter() {
            let (x, y) = b.end();
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        Some((x0, y0, x1, y1))
    }

    pub fn translate(&self, dx: i32, dy: i32) -> Loop {
        let w: Vec<Bond> = self.word.iter().map(|b| Bond::new(b.x + dx, b.y + dy, b.dir)).collect();
        Loop::from_closed_unchecked(&w)
    }

    /// Text form `(x,y):MOVES`, or `()` for the trivial loop.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.word.first() {
            None => s.push_str("()"),
            Some(b) => {
                let _ = write!(s, "({},{}):", b.x, b.y);
                for b in &self.word {
                    s.push(b.dir.letter());
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Loop, LoopError> {
        let word = parse_path(text)?;
        if word.is_empty() {
            return Ok(Loop::trivial());
        }
        Loop::from_path(&word)
    }
}

impl fmt::Display for Loop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Parses `(x,y):MOVES` into a raw path without reduction.
pub fn parse_path(text: &str) -> Result<Vec<Bond>, LoopError> {
    let t = text.trim();
    if t == "()" {
        return Ok(Vec::new());
    }
    let err = || LoopError::Parse(String::from(t));
    let rest = t.strip_prefix('(').ok_or_else(err)?;
    let close = rest.find(')').ok_or_else(err)?;
    let (coords, tail) = rest.split_at(close);
    let mut parts = coords.split(',');
    let x: i32 = parts.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
    let y: i32 = parts.next().ok_or_else(err)?.trim().parse().map_err(|_| err())?;
    if parts.next().is_some() {
        return Err(err());
    }
    let moves = tail[1..].strip_prefix(':').ok_or_else(err)?;
    path_from_moves((x, y), moves).ok_or_else(err)
}

pub fn path_from_moves(start: (i32, i32), moves: &str) -> Option<Vec<Bond>> {
    let (mut x, mut y) = start;
    let mut out = Vec::with_capacity(moves.len());
    for c in moves.chars() {
        let dir = Dir::from_letter(c)?;
        out.push(Bond::new(x, y, dir));
        let (dx, dy) = dir.delta();
        x += dx;
        y += dy;
    }
    Some(out)
}

/// Appends `count` bonds in direction `dir` to a path ending at `pos`.
pub fn push_run(path: &mut Vec<Bond>, pos: &mut (i32, i32), dir: Dir, count: i32) {
    let (dx, dy) = dir.delta();
    for _ in 0..count.max(0) {
        path.push(Bond::new(pos.0, pos.1, dir));
        pos.0 += dx;
        pos.1 += dy;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LoopString {
    pub loops: Vec<Loop>,
}

impl LoopString {
    pub fn new(loops: Vec<Loop>) -> Self {
        LoopString { loops }
    }

    pub fn single(l: Loop) -> Self {
        LoopString { loops: alloc::vec![l] }
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Drops trivial components, which contribute a factor 1.
    pub fn without_trivial(&self) -> LoopString {
        LoopString { loops: self.loops.iter().filter(|l| !l.is_trivial()).cloned().collect() }
    }

    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self.loops.iter().map(Loop::to_text).collect();
        parts.join(" | ")
    }

    pub fn parse(text: &str) -> Result<LoopString, LoopError> {
        let loops = text.split('|').map(Loop::parse).collect::<Result<Vec<_>, _>>()?;
        Ok(LoopString { loops })
    }

    /// Replaces component `k` by the loops of `parts`.
    pub fn replace_component(&self, k: usize, parts: &[Loop]) -> LoopString {
        let mut loops = Vec::with_capacity(self.loops.len() + parts.len());
        loops.extend_from_slice(&self.loops[..k]);
        loops.extend_from_slice(parts);
        loops.extend_from_slice(&self.loops[k + 1..]);
        LoopString { loops }
    }

    /// Replaces components `j < k` (in either order) by a single merged loop at
    /// position `min(j, k)`.
    pub fn replace_pair(&self, j: usize, k: usize, merged: Loop) -> LoopString {
        let (lo, hi) = if j < k { (j, k) } else { (k, j) };
        let mut loops = Vec::with_capacity(self.loops.len() - 1);
        for (i, l) in self.loops.iter().enumerate() {
            if i == lo {
                loops.push(merged.clone());
            } else if i != hi {
                loops.push(l.clone());
            }
        }
        LoopString { loops }
    }
}

impl fmt::Display for LoopString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn loc_check(l: &Loop, x: usize) -> Result<Bond, LoopError> {
    l.bond(x)
}

fn loop_of(word: &[Bond]) -> Loop {
    Loop::from_closed_unchecked(word)
}

/// `l = a e b e c` with `e` at `x` and `y` gives `(a e c, b e)`.
pub fn split_positive(l: &Loop, x: usize, y: usize) -> Result<(Loop, Loop), LoopError> {
    let e = loc_check(l, x)?;
    let f = loc_check(l, y)?;
    if x == y || e != f {
        return Err(LoopError::LocationMismatch);
    }
    let w = l.word();
    let n = w.len();
    let mut first = alloc::vec![w[x]];
    first.extend(cyclic_slice(w, y + 1, x + n));
    let mut second = cyclic_slice(w, x + 1, y);
    second.push(w[y]);
    Ok((loop_of(&first), loop_of(&second)))
}

/// `l = a e b e^-1 c` with `e` at `x` and `e^-1` at `y` gives `(a c, b)`.
pub fn split_negative(l: &Loop, x: usize, y: usize) -> Result<(Loop, Loop), LoopError> {
    let e = loc_check(l, x)?;
    let f = loc_check(l, y)?;
    if x == y || f != e.inverse() {
        return Err(LoopError::LocationMismatch);
    }
    let w = l.word();
    let n = w.len();
    let outer = cyclic_slice(w, y + 1, x + n);
    let inner = cyclic_slice(w, x + 1, y);
    Ok((loop_from_segment(&outer), loop_from_segment(&inner)))
}

fn loop_from_segment(seg: &[Bond]) -> Loop {
    if seg.is_empty() {
        Loop::trivial()
    } else {
        loop_of(seg)
    }
}

/// Positive merger. Same orientation: `(a e b, c e d) -> a e d c e b`.
/// Opposite orientation: `(a e b, c e^-1 d) -> a e c^-1 d^-1 e b`.
pub fn merge_positive(l: &Loop, x: usize, lp: &Loop, y: usize) -> Result<Loop, LoopError> {
    let e = loc_check(l, x)?;
    let f = loc_check(lp, y)?;
    let b = &l.rotated_at(x)[1..];
    let d = &lp.rotated_at(y)[1..];
    let mut w = alloc::vec![e];
    if f == e {
        w.extend_from_slice(d);
    } else if f == e.inverse() {
        w.extend(invert_word(d));
    } else {
        return Err(LoopError::LocationMismatch);
    }
    w.push(e);
    w.extend_from_slice(b);
    Ok(loop_of(&w))
}

/// Negative merger. Same orientation: `(a e b, c e d) -> a c^-1 d^-1 b`.
/// Opposite orientation: `(a e b, c e^-1 d) -> a d c b`.
pub fn merge_negative(l: &Loop, x: usize, lp: &Loop, y: usize) -> Result<Loop, LoopError> {
    let e = loc_check(l, x)?;
    let f = loc_check(lp, y)?;
    let b = &l.rotated_at(x)[1..];
    let d = &lp.rotated_at(y)[1..];
    let mut w: Vec<Bond> = b.to_vec();
    if f == e {
        w.extend(invert_word(d));
    } else if f == e.inverse() {
        w.extend_from_slice(d);
    } else {
        return Err(LoopError::LocationMismatch);
    }
    if w.is_empty() {
        return Ok(Loop::trivial());
    }
    Ok(loop_of(&w))
}

/// Negative twist: `a e b e c -> a b^-1 c`.
pub fn twist_negative(l: &Loop, x: usize, y: usize) -> Result<Loop, LoopError> {
    let e = loc_check(l, x)?;
    let f = loc_check(l, y)?;
    if x == y || e != f {
        return Err(LoopError::LocationMismatch);
    }
    let w = l.word();
    let n = w.len();
    let b = cyclic_slice(w, x + 1, y);
    let c = cyclic_slice(w, y + 1, x + n);
    let mut out = invert_word(&b);
    out.extend(c);
    if out.is_empty() {
        return Ok(Loop::trivial());
    }
    Ok(loop_of(&out))
}

/// Positive twist: `a e b e^-1 c -> a e b^-1 e^-1 c`.
pub fn twist_positive(l: &Loop, x: usize, y: usize) -> Result<Loop, LoopError> {
    let e = loc_check(l, x)?;
    let f = loc_check(l, y)?;
    if x == y || f != e.inverse() {
        return Err(LoopError::LocationMismatch);
    }
    let w = l.word();
    let n = w.len();
    let b = cyclic_slice(w, x + 1, y);
    let c = cyclic_slice(w, y + 1, x + n);
    let mut out = alloc::vec![e];
    out.extend(invert_word(&b));
    out.push(f);
    out.extend(c);
    Ok(loop_of(&out))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deformation {
    pub side: Side,
    pub result: Loop,
}

/// Negative deformations merge with the plaquettes through `e` negatively,
/// positive ones merge with the plaquettes through `e^-1` positively. Each
/// carries the side of `e` on which its plaquette lies.
pub fn deformation_sets(l: &Loop, x: usize) -> Result<(Vec<Deformation>, Vec<Deformation>), LoopError> {
    let e = loc_check(l, x)?;
    let mut minus = Vec::with_capacity(2);
    let mut plus = Vec::with_capacity(2);
    for side in [Side::Left, Side::Right] {
        let p = loop_of(&e.plaquette_word(side));
        let y = p.occurrences(e).iter().find(|o| o.1).map(|o| o.0).ok_or(LoopError::LocationMismatch)?;
        minus.push(Deformation { side, result: merge_negative(l, x, &p, y)? });
        let pinv = p.inverse();
        let y = pinv.occurrences(e).iter().find(|o| !o.1).map(|o| o.0).ok_or(LoopError::LocationMismatch)?;
        plus.push(Deformation { side, result: merge_positive(l, x, &pinv, y)? });
    }
    Ok((minus, plus))
}

/// Positive expansions pair `l` with plaquettes through `e^-1`, negative ones
/// with plaquettes through `e`.
pub fn expansion_sets(l: &Loop, x: usize) -> Result<(Vec<LoopString>, Vec<LoopString>), LoopError> {
    let e = loc_check(l, x)?;
    let mut plus = Vec::with_capacity(2);
    let mut minus = Vec::with_capacity(2);
    for side in [Side::Left, Side::Right] {
        let p = loop_of(&e.plaquette_word(side));
        minus.push(LoopString::new(alloc::vec![l.clone(), p.clone()]));
        plus.push(LoopString::new(alloc::vec![l.clone(), p.inverse()]));
    }
    Ok((plus, minus))
}

/// Which binary surgery to lift into a string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StringOp {
    SplitPositive,
    SplitNegative,
    TwistPositive,
    TwistNegative,
}

/// Applies a unary surgery to component `k` at locations `(x, y)` of that component.
pub fn lift_unary(s: &LoopString, k: usize, op: StringOp, x: usize, y: usize) -> Result<LoopString, LoopError> {
    let l = s.loops.get(k).ok_or(LoopError::LocationOutOfRange(k))?;
    let parts: Vec<Loop> = match op {
        StringOp::SplitPositive => {
            let (a, b) = split_positive(l, x, y)?;
            alloc::vec![a, b]
        }
        StringOp::SplitNegative => {
            let (a, b) = split_negative(l, x, y)?;
            alloc::vec![a, b]
        }
        StringOp::TwistPositive => alloc::vec![twist_positive(l, x, y)?],
        StringOp::TwistNegative => alloc::vec![twist_negative(l, x, y)?],
    };
    Ok(s.replace_component(k, &parts))
}

/// Merges components `j` (location `x`) and `k` (location `y`).
pub fn lift_merge(s: &LoopString, j: usize, x: usize, k: usize, y: usize, positive: bool) -> Result<LoopString, LoopError> {
    if j == k {
        return Err(LoopError::LocationMismatch);
    }
    let a = s.loops.get(j).ok_or(LoopError::LocationOutOfRange(j))?;
    let b = s.loops.get(k).ok_or(LoopError::LocationOutOfRange(k))?;
    let m = if positive { merge_positive(a, x, b, y)? } else { merge_negative(a, x, b, y)? };
    Ok(s.replace_pair(j, k, m))
}

/// Deformations of component `k` lifted into the string.
pub fn lift_deformations(s: &LoopString, k: usize, x: usize) -> Result<(Vec<(Side, LoopString)>, Vec<(Side, LoopString)>), LoopError> {
    let l = s.loops.get(k).ok_or(LoopError::LocationOutOfRange(k))?;
    let (minus, plus) = deformation_sets(l, x)?;
    let lift = |d: Vec<Deformation>| -> Vec<(Side, LoopString)> {
        d.into_iter().map(|d| (d.side, s.replace_component(k, &[d.result]))).collect()
    };
    Ok((lift(minus), lift(plus)))
}

/// Named segments of a crossing loop `e e1 A e4^-1 e' e2 B e3^-1`, given as
/// ranges of canonical locations. Segments `e3` and `e4` are stored as they
/// are traversed, i.e. already inverted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossingAnnotation {
    pub e_first: Vec<usize>,
    pub e_second: Vec<usize>,
    pub e1: Vec<usize>,
    pub a: Vec<usize>,
    pub e4_inv: Vec<usize>,
    pub e2: Vec<usize>,
    pub b: Vec<usize>,
    pub e3_inv: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedLoop {
    pub lp: Loop,
    pub ann: CrossingAnnotation,
    /// `e e1 A e4^-1 e^-1 e2 B e3^-1` instead of `e` twice.
    pub reversed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TripleKind {
    /// Crossing bond in the first traversal, partners in `e1` and `e3^-1`.
    First,
    /// Crossing bond in the second traversal, partners in `e2` and `e4^-1`.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub kind: TripleKind,
    pub center: usize,
    pub near: usize,
    pub far: usize,
}

impl AnnotatedLoop {
    /// Builds the annotated loop from raw segments.
    pub fn from_segments(
        e: &[Bond],
        e1: &[Bond],
        a: &[Bond],
        e4_inv: &[Bond],
        e2: &[Bond],
        b: &[Bond],
        e3_inv: &[Bond],
    ) -> Result<AnnotatedLoop, LoopError> {
        Self::build([e, e1, a, e4_inv, e, e2, b, e3_inv], false)
    }

    /// Same with the crossing edge traversed backwards the second time.
    pub fn from_segments_reversed(
        e: &[Bond],
        e1: &[Bond],
        a: &[Bond],
        e4_inv: &[Bond],
        e2: &[Bond],
        b: &[Bond],
        e3_inv: &[Bond],
    ) -> Result<AnnotatedLoop, LoopError> {
        let back = invert_word(e);
        Self::build([e, e1, a, e4_inv, &back, e2, b, e3_inv], true)
    }

    fn build(parts: [&[Bond]; 8], reversed: bool) -> Result<AnnotatedLoop, LoopError> {
        let mut raw = Vec::new();
        let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(8);
        for p in parts {
            let s = raw.len();
            raw.extend_from_slice(p);
            ranges.push((s, raw.len()));
        }
        let (lp, offset) = Loop::from_reduced_path(&raw)?;
        let n = raw.len();
        let map = |r: (usize, usize)| -> Vec<usize> { (r.0..r.1).map(|i| (i + n - offset) % n).collect() };
        let ann = CrossingAnnotation {
            e_first: map(ranges[0]),
            e1: map(ranges[1]),
            a: map(ranges[2]),
            e4_inv: map(ranges[3]),
            e_second: map(ranges[4]),
            e2: map(ranges[5]),
            b: map(ranges[6]),
            e3_inv: map(ranges[7]),
        };
        Ok(AnnotatedLoop { lp, ann, reversed })
    }

    /// The two lobes: `e e1 A e4^-1` and `e e2 B e3^-1`, or `e1 A e4^-1`
    /// and `e2 B e3^-1` for the reversed loop.
    pub fn lobes(&self) -> Result<(Loop, Loop), LoopError> {
        let x = self.ann.e_first[0];
        if self.reversed {
            let y = *self.ann.e_second.last().ok_or(LoopError::LocationMismatch)?;
            let (p, q) = split_negative(&self.lp, x, y)?;
            Ok((Loop::make_loop(p.word())?, Loop::make_loop(q.word())?))
        } else {
            split_positive(&self.lp, x, self.ann.e_second[0])
        }
    }
}

/// All compatible triples of bonds of an annotated crossing loop.
pub fn compatible_triples(al: &AnnotatedLoop) -> Vec<Triple> {
    let a = &al.ann;
    let mut out = Vec::new();
    for &c in &a.e_first {
        for &n in &a.e1 {
            for &f in &a.e3_inv {
                out.push(Triple { kind: TripleKind::First, center: c, near: n, far: f });
            }
        }
    }
    for &c in &a.e_second {
        for &n in &a.e2 {
            for &f in &a.e4_inv {
                out.push(Triple { kind: TripleKind::Second, center: c, near: n, far: f });
            }
        }
    }
    out
}

/// Random non-trivial loop: a non-backtracking walk of `steps` steps from the
/// origin closed by a monotone path back, then reduced. At least two steps.
pub fn random_loop<R: rand::Rng + ?Sized>(rng: &mut R, steps: usize) -> Loop {
    let steps = steps.max(2);
    loop {
        let mut path = Vec::with_capacity(2 * steps + 2);
        let mut pos = (0, 0);
        let mut last: Option<Dir> = None;
        for _ in 0..steps {
            let d = loop {
                let d = Dir::ALL[rng.gen_range(0..4)];
                if last != Some(d.reverse()) {
                    break d;
                }
            };
            push_run(&mut path, &mut pos, d, 1);
            last = Some(d);
        }
        let (x, y) = pos;
        if rng.gen_bool(0.5) {
            push_run(&mut path, &mut pos, if x > 0 { Dir::L } else { Dir::R }, x.abs());
            push_run(&mut path, &mut pos, if y > 0 { Dir::D } else { Dir::U }, y.abs());
        } else {
            push_run(&mut path, &mut pos, if y > 0 { Dir::D } else { Dir::U }, y.abs());
            push_run(&mut path, &mut pos, if x > 0 { Dir::L } else { Dir::R }, x.abs());
        }
        if let Ok(l) = Loop::make_loop(&path) {
            return l;
        }
    }
}
