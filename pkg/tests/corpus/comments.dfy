// leading comment with assert and invariant words
method Commented(a: int) returns (b: int)
  // comment between signature and contract
  ensures b == a
{
  // assert inside a comment is not an annotation
  b := a;
  assert b == a; // trailing note
  // calc { misleading; }
}
