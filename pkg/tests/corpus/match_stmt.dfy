method Pick(c: Color) returns (n: int)
{
  match c {
    case Red =>
      n := 0;
      assert n == 0;
    case Green =>
      n := 1;
    case Blue =>
      n := 2;
  }
}
