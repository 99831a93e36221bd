function double(n: Nat): Nat
{
  match n
  case Zero => Zero
  case Succ(m) => Succ(Succ(double(m)))
}

method UseDouble(n: Nat)
{
  assert double(Zero) == Zero;
}
