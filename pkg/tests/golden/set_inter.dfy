lemma set_eq_simple(A: set<int>, B: set<int>, x: int)
  requires x in A && A == B
  ensures x in B
{ }

lemma set_inter_empty_contr(A: set<int>, B: set<int>, x: int)
  requires x in A && A * B == {}
  ensures !(x in B)
{
  if x in B {
    calc ==> {
      x in A * B;
      { set_eq_simple(A*B, {}, x); }
      x in {};
      false;
    }
  }
}
