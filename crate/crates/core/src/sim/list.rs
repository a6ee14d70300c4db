//! Intrusive doubly linked lists over dense object indices.
//!
//! Several lists may share one [`Links`] table as long as every object sits
//! in at most one of them.

pub(crate) const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Links {
    prev: Vec<usize>,
    next: Vec<usize>,
}

impl Links {
    pub(crate) fn new(n: usize) -> Self {
        Links {
            prev: vec![NIL; n],
            next: vec![NIL; n],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DList {
    head: usize,
    tail: usize,
    len: usize,
}

impl DList {
    pub(crate) fn new() -> Self {
        DList {
            head: NIL,
            tail: NIL,
            len: 0,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Oldest element.
    pub(crate) fn front(&self) -> Option<usize> {
        (self.head != NIL).then_some(self.head)
    }

    pub(crate) fn push_back(&mut self, links: &mut Links, k: usize) {
        links.prev[k] = self.tail;
        links.next[k] = NIL;
        if self.tail == NIL {
            self.head = k;
        } else {
            links.next[self.tail] = k;
        }
        self.tail = k;
        self.len += 1;
    }

    pub(crate) fn remove(&mut self, links: &mut Links, k: usize) {
        let (p, n) = (links.prev[k], links.next[k]);
        if p == NIL {
            self.head = n;
        } else {
            links.next[p] = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            links.prev[n] = p;
        }
        links.prev[k] = NIL;
        links.next[k] = NIL;
        self.len -= 1;
    }

    pub(crate) fn pop_front(&mut self, links: &mut Links) -> Option<usize> {
        let k = self.front()?;
        self.remove(links, k);
        Some(k)
    }

    /// Puts `new` into the position held by `old`, which leaves the list.
    pub(crate) fn replace(&mut self, links: &mut Links, old: usize, new: usize) {
        let (p, n) = (links.prev[old], links.next[old]);
        links.prev[new] = p;
        links.next[new] = n;
        if p == NIL {
            self.head = new;
        } else {
            links.next[p] = new;
        }
        if n == NIL {
            self.tail = new;
        } else {
            links.prev[n] = new;
        }
        links.prev[old] = NIL;
        links.next[old] = NIL;
    }

    pub(crate) fn move_to_back(&mut self, links: &mut Links, k: usize) {
        if self.tail != k {
            self.remove(links, k);
            self.push_back(links, k);
        }
    }

    pub(crate) fn iter<'a>(&self, links: &'a Links) -> impl Iterator<Item = usize> + 'a {
        let mut cur = self.head;
        std::iter::from_fn(move || {
            if cur == NIL {
                None
            } else {
                let k = cur;
                cur = links.next[k];
                Some(k)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_remove_replace() {
        let mut links = Links::new(6);
        let mut l = DList::new();
        for k in [3, 1, 4] {
            l.push_back(&mut links, k);
        }
        assert_eq!(l.iter(&links).collect::<Vec<_>>(), vec![3, 1, 4]);
        l.replace(&mut links, 1, 5);
        assert_eq!(l.iter(&links).collect::<Vec<_>>(), vec![3, 5, 4]);
        l.move_to_back(&mut links, 3);
        assert_eq!(l.iter(&links).collect::<Vec<_>>(), vec![5, 4, 3]);
        assert_eq!(l.pop_front(&mut links), Some(5));
        l.remove(&mut links, 3);
        assert_eq!(l.iter(&links).collect::<Vec<_>>(), vec![4]);
        assert_eq!(l.len(), 1);
    }
}
