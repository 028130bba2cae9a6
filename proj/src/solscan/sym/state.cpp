#include "solscan/state.hpp"

#include <cassert>

namespace solscan::sym {

ExprRef MemRegion::load_byte(ExprArena& arena, uint64_t offset) const {
  auto it = overlay.find(offset);
  if (it != overlay.end()) return it->second;
  if (init && offset < init->size()) return (*init)[offset];
  return arena.constant(0, 8);
}

void MemRegion::store_byte(uint64_t offset, ExprRef value) {
  overlay[offset] = value;
}

MemRegion* SymState::region_at(uint64_t addr) {
  for (MemRegion& r : mem)
    if (r.contains(addr)) return &r;
  return nullptr;
}

const MemRegion* SymState::region_at(uint64_t addr) const {
  for (const MemRegion& r : mem)
    if (r.contains(addr)) return &r;
  return nullptr;
}

MemRegion& SymState::region(Region kind) {
  for (MemRegion& r : mem)
    if (r.kind == kind) return r;
  assert(false && "region not mapped");
  return mem.front();
}

const MemRegion& SymState::region(Region kind) const {
  for (const MemRegion& r : mem)
    if (r.kind == kind) return r;
  assert(false && "region not mapped");
  return mem.front();
}

ExprRef SymState::load(ExprArena& arena, uint64_t addr, uint32_t width) const {
  const MemRegion* r = region_at(addr);
  assert(r && addr - r->base + width <= r->size);
  uint64_t off = addr - r->base;
  ExprRef value = r->load_byte(arena, off);
  for (uint32_t i = 1; i < width; ++i)
    value = arena.concat(r->load_byte(arena, off + i), value);
  return value;
}

void SymState::store(ExprArena& arena, uint64_t addr, uint32_t width,
                     ExprRef value) {
  MemRegion* r = region_at(addr);
  assert(r && r->writable && addr - r->base + width <= r->size);
  uint64_t off = addr - r->base;
  for (uint32_t i = 0; i < width; ++i)
    r->store_byte(off + i, arena.extract(value, 8 * i + 7, 8 * i));
}

}  // namespace solscan::sym
