#include <stdint.h>
#include <stdlib.h>

//@ pure int hdiv(int x, int y) = y == 0 ? 0 : \euclidean_div(x, y);
//@ pure int hmod(int x, int y) = y == 0 ? 0 : \euclidean_mod(x, y);
/*@
  ensures \result == hdiv(x, y);
@*/
static inline int div_eucl(int x, int y)
{
  if (y == 0) return 0;
  int q = x / y;
  int r = x % y;
  return r < 0 ? q + (y > 0 ? -1 : 1) : q;
}
/*@
  ensures \result == hmod(x, y);
@*/
static inline int mod_eucl(int x, int y)
{
  if (y == 0) return 0;
  int r = x % y;
  return r < 0 ? r + (y > 0 ? y : -y) : r;
}

struct halide_dimension_t {int32_t min, max;};
struct buffer {int32_t dimensions;struct halide_dimension_t *dim;int32_t *host;};
//@ pure int p_i(int x);

/*@
  // Buffer annotations
  context inpb != NULL ** Perm(inpb, 1\2);
  context Perm(inpb->dim, 1\2) ** inpb->dim != NULL;
  context \pointer_length(inpb->dim) == 2;
  context Perm(inpb->host, 1\2) ** inpb->host != NULL;
  context Perm(&inpb->dim[0], 1\2);
  context Perm(inpb->dim[0].min, 1\2) ** Perm(inpb->dim[0].max, 1\2);
  context Perm(&inpb->dim[1], 1\2);
  context Perm(inpb->dim[1].min, 1\2) ** Perm(inpb->dim[1].max, 1\2);
  context \pointer_length(inpb->host) == 1026*1026;
  context blur_yb != NULL ** Perm(blur_yb, 1\2);
  context Perm(blur_yb->dim, 1\2) ** blur_yb->dim != NULL;
  context \pointer_length(blur_yb->dim) == 2;
  context Perm(blur_yb->host, 1\2) ** blur_yb->host != NULL;
  context Perm(&blur_yb->dim[0], 1\2);
  context Perm(blur_yb->dim[0].min, 1\2) ** Perm(blur_yb->dim[0].max, 1\2);
  context Perm(&blur_yb->dim[1], 1\2);
  context Perm(blur_yb->dim[1].min, 1\2) ** Perm(blur_yb->dim[1].max, 1\2);
  context \pointer_length(blur_yb->host) == 1024*1024;
  context blur_yb->host != inpb->host;
  context inpb->dim[0].min == 0 && inpb->dim[0].max == 1026;
  context inpb->dim[1].min == 0 && inpb->dim[1].max == 1026;
  context blur_yb->dim[0].min == 0 && blur_yb->dim[0].max == 1024;
  context blur_yb->dim[1].min == 0 && blur_yb->dim[1].max == 1024;
  context (\forall* int x, int y; 0<=x && x<1026 && 0<=y && y<1026; Perm(&inpb->host[y*1026 + x], 1\2));
  context (\forall int x, int y; 0<=x && x<1026 && 0<=y && y<1026; inpb->host[y*1026 + x] == p_i(y*1026 + x));
  context (\forall* int x, int y; 0<=x && x<1024 && 0<=y && y<1024; Perm(&blur_yb->host[y*1024 + x], 1\1));
  // Pipeline preconditions
  requires inpb->dim[0].min == blur_yb->dim[0].min && inpb->dim[0].max == blur_yb->dim[0].max + 2 && inpb->dim[1].min == blur_yb->dim[1].min && inpb->dim[1].max == blur_yb->dim[1].max + 2;
  // Pipeline postconditions
  ensures (\forall int x, int y; blur_yb->dim[0].min<=x && x<blur_yb->dim[0].max && blur_yb->dim[1].min<=y && y<blur_yb->dim[1].max; blur_yb->host[y*1024 + x] == hdiv(hdiv(p_i(y*1026 + x) + p_i(y*1026 + (x + 1)) + p_i(y*1026 + (x + 2)), 3) + hdiv(p_i((y + 1)*1026 + x) + p_i((y + 1)*1026 + (x + 1)) + p_i((y + 1)*1026 + (x + 2)), 3) + hdiv(p_i((y + 2)*1026 + x) + p_i((y + 2)*1026 + (x + 1)) + p_i((y + 2)*1026 + (x + 2)), 3), 3));
@*/
int blur(struct buffer *inpb, struct buffer *blur_yb) {
  int32_t* _blur_y = blur_yb->host;
  int32_t* _inp = inpb->host;
  // produce blur_y
  #pragma omp parallel for
  for (int yo = 0; yo < 0 + 128; yo++)
  /*@
    context 0<=yo && yo<128;
    context (\forall* int x, int y; 0<=x && x<1026 && 0<=y && y<1026; Perm(&_inp[y*1026 + x], 1\(2*128)));
    context (\forall int x, int y; 0<=x && x<1026 && 0<=y && y<1026; _inp[y*1026 + x] == p_i(y*1026 + x));
    context (\forall* int yif, int xof, int xif; 0<=yif && yif<8 && 0<=xof && xof<512 && 0<=xif && xif<2; Perm(&_blur_y[(yo*8 + yif)*1024 + (xof*2 + xif)], 1\1));
    ensures (\forall int yif, int xof, int xif; 0<=yif && yif<8 && 0<=xof && xof<512 && 0<=xif && xif<2; _blur_y[(yo*8 + yif)*1024 + (xof*2 + xif)] == hdiv(hdiv(p_i((yo*8 + yif)*1026 + (xof*2 + xif)) + p_i((yo*8 + yif)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yif)*1026 + (xof*2 + xif + 2)), 3) + hdiv(p_i((yo*8 + yif + 1)*1026 + (xof*2 + xif)) + p_i((yo*8 + yif + 1)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yif + 1)*1026 + (xof*2 + xif + 2)), 3) + hdiv(p_i((yo*8 + yif + 2)*1026 + (xof*2 + xif)) + p_i((yo*8 + yif + 2)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yif + 2)*1026 + (xof*2 + xif + 2)), 3), 3));
  @*/
  {
    {
      int32_t *_blur_x = (int32_t *)malloc(sizeof(int32_t) * 10240);
      /*@
        loop_invariant 0<=yi && yi<=8;
        loop_invariant (\forall* int x, int y; 0<=x && x<1026 && 0<=y && y<1026; Perm(&_inp[y*1026 + x], 1\(2*128)));
        loop_invariant (\forall int x, int y; 0<=x && x<1026 && 0<=y && y<1026; _inp[y*1026 + x] == p_i(y*1026 + x));
        loop_invariant (\forall* int x, int y; 0<=x && x<1024 && yo*8<=y && y<yo*8 + 10; Perm(&_blur_x[(y - yo*8)*1024 + x], 1\1));
        loop_invariant (\forall* int yif, int xof, int xif; 0<=yif && yif<8 && 0<=xof && xof<512 && 0<=xif && xif<2; Perm(&_blur_y[(yo*8 + yif)*1024 + (xof*2 + xif)], 1\1));
        loop_invariant (\forall int yif, int xof, int xif; 0<=yif && yif<yi && 0<=xof && xof<512 && 0<=xif && xif<2; _blur_y[(yo*8 + yif)*1024 + (xof*2 + xif)] == hdiv(hdiv(p_i((yo*8 + yif)*1026 + (xof*2 + xif)) + p_i((yo*8 + yif)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yif)*1026 + (xof*2 + xif + 2)), 3) + hdiv(p_i((yo*8 + yif + 1)*1026 + (xof*2 + xif)) + p_i((yo*8 + yif + 1)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yif + 1)*1026 + (xof*2 + xif + 2)), 3) + hdiv(p_i((yo*8 + yif + 2)*1026 + (xof*2 + xif)) + p_i((yo*8 + yif + 2)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yif + 2)*1026 + (xof*2 + xif + 2)), 3), 3));
      @*/
      for (int yi = 0; yi < 0 + 8; yi++)
      {
        // produce blur_x
        /*@
          loop_invariant yo*8 + yi<=y && y<=yo*8 + yi + 3;
          loop_invariant (\forall* int x, int y1; 0<=x && x<1026 && 0<=y1 && y1<1026; Perm(&_inp[y1*1026 + x], 1\(2*128)));
          loop_invariant (\forall int x, int y1; 0<=x && x<1026 && 0<=y1 && y1<1026; _inp[y1*1026 + x] == p_i(y1*1026 + x));
          loop_invariant (\forall* int yf, int xof, int xif; yo*8 + yi<=yf && yf<yo*8 + yi + 3 && 0<=xof && xof<512 && 0<=xif && xif<2; Perm(&_blur_x[(yf - yo*8)*1024 + (xof*2 + xif)], 1\1));
          loop_invariant (\forall int yf, int xof, int xif; yo*8 + yi<=yf && yf<y && 0<=xof && xof<512 && 0<=xif && xif<2; _blur_x[(yf - yo*8)*1024 + (xof*2 + xif)] == hdiv(p_i(yf*1026 + (xof*2 + xif)) + p_i(yf*1026 + (xof*2 + xif + 1)) + p_i(yf*1026 + (xof*2 + xif + 2)), 3));
        @*/
        for (int y = yo*8 + yi; y < yo*8 + yi + 3; y++)
        {
          /*@
            loop_invariant 0<=xo && xo<=512;
            loop_invariant (\forall* int x, int y1; 0<=x && x<1026 && 0<=y1 && y1<1026; Perm(&_inp[y1*1026 + x], 1\(2*128)));
            loop_invariant (\forall int x, int y1; 0<=x && x<1026 && 0<=y1 && y1<1026; _inp[y1*1026 + x] == p_i(y1*1026 + x));
            loop_invariant (\forall* int xof, int xif; 0<=xof && xof<512 && 0<=xif && xif<2; Perm(&_blur_x[(y - yo*8)*1024 + (xof*2 + xif)], 1\1));
            loop_invariant (\forall int xof, int xif; 0<=xof && xof<xo && 0<=xif && xif<2; _blur_x[(y - yo*8)*1024 + (xof*2 + xif)] == hdiv(p_i(y*1026 + (xof*2 + xif)) + p_i(y*1026 + (xof*2 + xif + 1)) + p_i(y*1026 + (xof*2 + xif + 2)), 3));
          @*/
          for (int xo = 0; xo < 0 + 512; xo++)
          {
            int32_t _t0 = (y - yo*8)*1024 + xo*2;
            _blur_x[_t0] = div_eucl(_inp[y*1026 + xo*2] + _inp[y*1026 + (xo*2 + 1)] + _inp[y*1026 + (xo*2 + 2)], 3);
            int32_t _t1 = (y - yo*8)*1024 + (xo*2 + 1);
            _blur_x[_t1] = div_eucl(_inp[y*1026 + (xo*2 + 1)] + _inp[y*1026 + (xo*2 + 2)] + _inp[y*1026 + (xo*2 + 3)], 3);
          } // for xo
        } // for y
        // consume blur_x
        /*@
          loop_invariant 0<=xo && xo<=512;
          loop_invariant (\forall* int x, int y; 0<=x && x<1024 && yo*8<=y && y<yo*8 + 10; Perm(&_blur_x[(y - yo*8)*1024 + x], 1\2));
          loop_invariant (\forall int x, int y; 0<=x && x<1024 && yo*8 + yi<=y && y<yo*8 + yi + 3; _blur_x[(y - yo*8)*1024 + x] == hdiv(p_i(y*1026 + x) + p_i(y*1026 + (x + 1)) + p_i(y*1026 + (x + 2)), 3));
          loop_invariant (\forall* int xof, int xif; 0<=xof && xof<512 && 0<=xif && xif<2; Perm(&_blur_y[(yo*8 + yi)*1024 + (xof*2 + xif)], 1\1));
          loop_invariant (\forall int xof, int xif; 0<=xof && xof<xo && 0<=xif && xif<2; _blur_y[(yo*8 + yi)*1024 + (xof*2 + xif)] == hdiv(hdiv(p_i((yo*8 + yi)*1026 + (xof*2 + xif)) + p_i((yo*8 + yi)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yi)*1026 + (xof*2 + xif + 2)), 3) + hdiv(p_i((yo*8 + yi + 1)*1026 + (xof*2 + xif)) + p_i((yo*8 + yi + 1)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yi + 1)*1026 + (xof*2 + xif + 2)), 3) + hdiv(p_i((yo*8 + yi + 2)*1026 + (xof*2 + xif)) + p_i((yo*8 + yi + 2)*1026 + (xof*2 + xif + 1)) + p_i((yo*8 + yi + 2)*1026 + (xof*2 + xif + 2)), 3), 3));
        @*/
        for (int xo = 0; xo < 0 + 512; xo++)
        {
          int32_t _t2 = (yo*8 + yi)*1024 + xo*2;
          _blur_y[_t2] = div_eucl(_blur_x[yi*1024 + xo*2] + _blur_x[(yi + 1)*1024 + xo*2] + _blur_x[(yi + 2)*1024 + xo*2], 3);
          int32_t _t3 = (yo*8 + yi)*1024 + (xo*2 + 1);
          _blur_y[_t3] = div_eucl(_blur_x[yi*1024 + (xo*2 + 1)] + _blur_x[(yi + 1)*1024 + (xo*2 + 1)] + _blur_x[(yi + 2)*1024 + (xo*2 + 1)], 3);
        } // for xo
      } // for yi
      free(_blur_x);
    } // alloc _blur_x
  } // for yo
  return 0;
}
