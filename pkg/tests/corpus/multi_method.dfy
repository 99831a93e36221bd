function abs(x: int): int
{
  if x < 0 then -x else x
}

lemma AbsNonNeg(x: int)
  ensures abs(x) >= 0
{
}

method UseAbs(a: int, b: int) returns (d: int)
  ensures d >= 0
{
  AbsNonNeg(a - b);
  d := abs(a - b);
  assert d >= 0;
}

method Twice(x: int) returns (y: int)
{
  y := abs(x) + abs(x);
  AbsNonNeg(x);
}
