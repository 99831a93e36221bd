method A(n: int) { assert n == n; }

method B(n: int) returns (m: int)
  ensures m >= n
{
  m := n;
  if m < 0 { m := 0; }
  while m < n
    invariant m >= 0
  {
    m := m + 1;
  }
  assert m >= n || n < 0;
  assert m >= 0;
}

lemma C()
{
}
