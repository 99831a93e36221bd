method Greet(name: string) returns (msg: string)
{
  msg := "hello, { " + name + " } && goodbye";
  assert msg != "";
  var c := 'x';
  assert c == 'x';
}
