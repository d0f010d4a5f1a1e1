self.addEventListener('install', event => {
  event.waitUntil(caches.open('shell').then(cache => cache.addAll(['/index.html', '/app.css'])));
});

self.addEventListener('fetch', event => {
  event.respondWith(caches.match(event.request));
});
