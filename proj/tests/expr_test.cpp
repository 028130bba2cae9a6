#include "doctest.h"
#include "solscan/expr.hpp"

#include <random>

using namespace solscan::sym;

TEST_CASE("constant folding") {
  ExprArena a;
  CHECK(a.const_value(a.add(a.constant(3, 64), a.constant(4, 64))) == 7);
  CHECK(a.const_value(a.mul(a.constant(0xffffffffffffffffull, 64),
                            a.constant(2, 64))) == 0xfffffffffffffffeull);
  CHECK(a.const_value(a.eq(a.constant(5, 32), a.constant(5, 32))) == 1);
  CHECK(a.const_value(a.ult(a.constant(5, 8), a.constant(3, 8))) == 0);
  CHECK(a.const_value(a.slt(a.constant(0xff, 8), a.constant(0, 8))) == 1);
  CHECK(a.const_value(a.udiv(a.constant(7, 64), a.constant(0, 64))) ==
        0xffffffffffffffffull);
}

TEST_CASE("hash consing gives syntactic equality") {
  ExprArena a;
  ExprRef x = a.var("x", 64);
  ExprRef e1 = a.add(x, a.constant(1, 64));
  ExprRef e2 = a.add(x, a.constant(1, 64));
  CHECK(e1 == e2);
  CHECK(a.var("x", 64) != x);  // vars are unique by creation
}

TEST_CASE("ite simplification") {
  ExprArena a;
  ExprRef x = a.var("x", 8);
  ExprRef y = a.var("y", 8);
  CHECK(a.ite(a.bool_true(), x, y) == x);
  CHECK(a.ite(a.bool_false(), x, y) == y);
  CHECK(a.ite(a.eq(x, y), x, x) == x);
}

TEST_CASE("extract and concat") {
  ExprArena a;
  ExprRef c = a.constant(0xdeadbeef, 32);
  CHECK(a.const_value(a.extract(c, 15, 0)) == 0xbeef);
  CHECK(a.const_value(a.extract(c, 31, 16)) == 0xdead);
  ExprRef x = a.var("x", 32);
  // concat of adjacent extracts folds back to the source
  CHECK(a.concat(a.extract(x, 31, 16), a.extract(x, 15, 0)) == x);
  CHECK(a.const_value(a.concat(a.constant(0xaa, 8), a.constant(0x55, 8))) ==
        0xaa55);
}

TEST_CASE("eval matches semantics on random exprs") {
  ExprArena a;
  ExprRef x = a.var("x", 64);
  ExprRef y = a.var("y", 64);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    uint64_t vx = rng(), vy = rng();
    std::vector<uint64_t> asg = {vx, vy};
    CHECK(a.eval(a.add(x, y), asg) == vx + vy);
    CHECK(a.eval(a.mul(x, y), asg) == vx * vy);
    CHECK(a.eval(a.bit_xor(x, y), asg) == (vx ^ vy));
    CHECK(a.eval(a.ult(x, y), asg) == (vx < vy ? 1 : 0));
    CHECK(a.eval(a.lshr(x, a.constant(vy % 64, 64)), asg) ==
          vx >> (vy % 64));
  }
}

TEST_CASE("collect vars") {
  ExprArena a;
  ExprRef x = a.var("x", 64, VarField::Signer, 2, 0);
  ExprRef y = a.var("y", 64, VarField::Owner, 1, 3);
  ExprRef e = a.ite(a.eq(x, y), a.add(x, a.constant(1, 64)), y);
  std::vector<uint32_t> vars;
  a.collect_vars(e, vars);
  REQUIRE(vars.size() == 2);
  CHECK(a.var_info(vars[0]).field == VarField::Signer);
  CHECK(a.var_info(vars[0]).account == 2);
  CHECK(a.var_info(vars[1]).field == VarField::Owner);
}
