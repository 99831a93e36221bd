method Deep(n: int) returns (acc: int)
  requires n >= 0
{
  acc := 0;
  var i := 0;
  while i < n
    invariant 0 <= i
    invariant acc >= 0
  {
    var j := 0;
    while j < i
      invariant j >= 0
      decreases i - j
    {
      if j % 2 == 0 {
        if acc > 100 {
          acc := acc - 1;
        } else {
          acc := acc + 2;
          assert acc > 0;
        }
      }
      j := j + 1;
    }
    i := i + 1;
  }
}
