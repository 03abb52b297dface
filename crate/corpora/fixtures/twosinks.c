typedef struct _IO_FILE FILE;
typedef unsigned long size_t;
typedef long ssize_t;

extern size_t fread(void *ptr, size_t size, size_t nmemb, FILE *stream);
extern ssize_t recv(int sockfd, void *buf, size_t len, int flags);
extern void *memcpy(void *dest, const void *src, size_t n);

void serve(FILE *f, int sock, char *d, char *s) {
  int a;
  int b;
  int m1;
  int m2;
  fread((char *)&a, 4, 1, f);
  recv(sock, (char *)&b, 4, 0);
  m1 = a + b;
  m2 = b - a;
  memcpy(d, s, m1);
  memcpy(s, d, m2);
}
