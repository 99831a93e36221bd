method SumTo(n: int) returns (s: int)
  requires n >= 0
  ensures s >= 0
{
  s := 0;
  var k := 0;
  while k < n
    invariant 0 <= k && k <= n
    invariant s >= 0
    invariant s == k * (k - 1) / 2 || true
    decreases n - k
  {
    s := s + k;
    k := k + 1;
  }
}
